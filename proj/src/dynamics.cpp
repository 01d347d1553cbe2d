#include "hcr/dynamics.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

namespace hcr {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::Config: return "config error";
        case ErrorCode::Shape: return "shape error";
        case ErrorCode::Parse: return "parse error";
        case ErrorCode::Domain: return "domain error";
        case ErrorCode::DivergedIntegration: return "diverged integration";
        case ErrorCode::RolloutDiverged: return "rollout diverged";
        case ErrorCode::Degenerate: return "degenerate input";
        case ErrorCode::InsufficientData: return "insufficient data";
        case ErrorCode::Unsupported: return "unsupported";
        case ErrorCode::Numerical: return "numerical failure";
        case ErrorCode::Filesystem: return "filesystem error";
        case ErrorCode::MissingArtifact: return "missing artifact";
        case ErrorCode::Stage: return "stage failure";
    }
    return "error";
}

const char* source_name(Source s) {
    switch (s) {
        case Source::Lorenz96: return "lorenz96";
        case Source::KuramotoSivashinsky: return "ks";
        case Source::Logistic: return "logistic";
        case Source::External: return "external";
    }
    return "external";
}

Trajectory Trajectory::slice(std::size_t begin, std::size_t count) const {
    require(begin + count <= steps(), ErrorCode::Shape, "slice out of range");
    Trajectory out;
    out.data = data.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(count));
    out.dt = dt;
    out.source = source;
    return out;
}

void Trajectory::validate() const {
    require(data.rows() >= 2, ErrorCode::Shape, "trajectory needs at least 2 time steps");
    require(data.cols() >= 1, ErrorCode::Shape, "trajectory needs at least 1 dimension");
    require(dt > 0 && std::isfinite(dt), ErrorCode::Domain, "trajectory dt must be positive");
    require(data.allFinite(), ErrorCode::Domain, "trajectory contains non-finite entries");
}

void validate_system(const SystemSpec& spec) {
    if (const auto* l = std::get_if<Lorenz96Params>(&spec)) {
        require(l->dim >= 4, ErrorCode::Config, "lorenz96 requires d >= 4");
        require(l->forcing > 0, ErrorCode::Config, "lorenz96 requires F > 0");
    } else if (const auto* k = std::get_if<KsParams>(&spec)) {
        require(k->grid_points >= 8 && k->grid_points % 2 == 0, ErrorCode::Config,
                "ks requires an even number of grid points >= 8");
        require(k->length > 0, ErrorCode::Config, "ks requires L > 0");
    } else if (const auto* g = std::get_if<LogisticParams>(&spec)) {
        require(g->r > 0 && g->r <= 4, ErrorCode::Config, "logistic requires 0 < r <= 4");
    } else if (const auto* e = std::get_if<ExternalSource>(&spec)) {
        require(!e->path.empty(), ErrorCode::Config, "external source needs a path");
    }
}

void lorenz96_rhs(const Vector& x, double forcing, Vector& out) {
    const Eigen::Index d = x.size();
    if (out.size() != d) out.resize(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        const double xp1 = x[(i + 1) % d];
        const double xm1 = x[(i + d - 1) % d];
        const double xm2 = x[(i + d - 2) % d];
        out[i] = (xp1 - xm2) * xm1 - x[i] + forcing;
    }
}

void rk4_step_lorenz96(Vector& x, double forcing, double h, Vector work[4]) {
    Vector& k1 = work[0];
    Vector& k2 = work[1];
    Vector& k3 = work[2];
    Vector& k4 = work[3];
    for (int i = 0; i < 4; ++i)
        if (work[i].size() != x.size()) work[i].resize(x.size());
    lorenz96_rhs(x, forcing, k1);
    lorenz96_rhs(x + 0.5 * h * k1, forcing, k2);
    lorenz96_rhs(x + 0.5 * h * k2, forcing, k3);
    lorenz96_rhs(x + h * k3, forcing, k4);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

namespace {

void check_options(const SimulationOptions& opt) {
    require(opt.dt > 0 && std::isfinite(opt.dt), ErrorCode::Config, "dt must be positive");
    require(opt.substeps >= 1, ErrorCode::Config, "substeps must be >= 1");
    require(opt.steps >= 1, ErrorCode::Config, "steps must be >= 1");
}

}  // namespace

Trajectory integrate_lorenz96(const Vector& x0, double forcing, const SimulationOptions& opt) {
    check_options(opt);
    require(x0.size() >= 4, ErrorCode::Config, "lorenz96 requires d >= 4");
    const double h = opt.dt / opt.substeps;
    require(h <= 0.05 + 1e-12, ErrorCode::Config, "lorenz96 integration step must be <= 0.05");

    const Eigen::Index d = x0.size();
    Vector x = x0;
    Vector work[4] = {Vector(d), Vector(d), Vector(d), Vector(d)};
    Trajectory out;
    out.dt = opt.dt;
    out.source = Source::Lorenz96;
    out.data.resize(static_cast<Eigen::Index>(opt.steps), d);

    const std::size_t total = opt.transient + opt.steps;
    for (std::size_t s = 0; s < total; ++s) {
        for (int sub = 0; sub < opt.substeps; ++sub) rk4_step_lorenz96(x, forcing, h, work);
        if (!x.allFinite()) {
            fail(ErrorCode::DivergedIntegration,
                 "lorenz96 state became non-finite at step " + std::to_string(s));
        }
        if (s >= opt.transient) out.data.row(static_cast<Eigen::Index>(s - opt.transient)) = x.transpose();
    }
    return out;
}

Trajectory simulate_lorenz96(int dim, double forcing, const SimulationOptions& opt) {
    validate_system(Lorenz96Params{dim, forcing});
    std::mt19937_64 rng(derive_seed(opt.seed, 0x196));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Vector x0 = Vector::Constant(dim, forcing);
    x0[0] += 0.01 * (0.5 + unit(rng));
    return integrate_lorenz96(x0, forcing, opt);
}

Trajectory simulate_logistic(const LogisticParams& params, double x0, std::size_t steps,
                             std::size_t transient) {
    validate_system(params);
    require(steps >= 1, ErrorCode::Config, "steps must be >= 1");
    Trajectory out;
    out.dt = 1.0;
    out.source = Source::Logistic;
    out.data.resize(static_cast<Eigen::Index>(steps), 1);
    double x = x0;
    for (std::size_t s = 0; s < transient + steps; ++s) {
        x = params.r * x * (1.0 - x);
        if (s >= transient) out.data(static_cast<Eigen::Index>(s - transient), 0) = x;
    }
    return out;
}

double logistic_initial_condition(std::uint64_t seed) {
    std::mt19937_64 rng(derive_seed(seed, 0x10615));
    std::uniform_real_distribution<double> unit(0.05, 0.95);
    return unit(rng);
}

Trajectory simulate(const SystemSpec& spec, const SimulationOptions& opt) {
    validate_system(spec);
    if (const auto* l = std::get_if<Lorenz96Params>(&spec)) return simulate_lorenz96(l->dim, l->forcing, opt);
    if (const auto* k = std::get_if<KsParams>(&spec)) return simulate_ks(*k, opt);
    if (const auto* g = std::get_if<LogisticParams>(&spec))
        return simulate_logistic(*g, logistic_initial_condition(opt.seed), opt.steps, opt.transient);
    return load_csv(std::get<ExternalSource>(spec).path, opt.dt);
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        std::size_t comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

bool parse_double(std::string_view s, double& value) {
    s = trim(s);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

Trajectory load_csv(const std::filesystem::path& path, double dt) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::Filesystem, "cannot open " + path.string());

    std::vector<std::vector<double>> rows;
    std::size_t width = 0;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_fields(line);
        std::vector<double> values(fields.size());
        std::size_t bad_col = 0;
        std::size_t numeric = 0;
        for (std::size_t c = 0; c < fields.size(); ++c) {
            if (parse_double(fields[c], values[c])) {
                ++numeric;
            } else if (bad_col == 0) {
                bad_col = c + 1;
            }
        }
        if (bad_col != 0) {
            // A header is the first non-empty line with no numeric cell at all.
            if (rows.empty() && !header_seen && numeric == 0) {
                header_seen = true;
                continue;
            }
            fail(ErrorCode::Parse, path.string() + ": non-numeric cell at row " + std::to_string(line_no) +
                                       ", column " + std::to_string(bad_col));
        }
        if (width == 0) width = values.size();
        if (values.size() != width) {
            fail(ErrorCode::Parse, path.string() + ": ragged row " + std::to_string(line_no) +
                                       " has " + std::to_string(values.size()) + " columns, expected " +
                                       std::to_string(width));
        }
        rows.push_back(std::move(values));
    }
    require(!rows.empty(), ErrorCode::Parse, path.string() + ": no numeric rows");

    Trajectory out;
    out.dt = dt;
    out.source = Source::External;
    out.data.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < width; ++c)
            out.data(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    return out;
}

void save_csv(const Trajectory& traj, const std::filesystem::path& path, const std::vector<std::string>& header) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path);
    require(out.good(), ErrorCode::Filesystem, "cannot write " + path.string());
    if (!header.empty()) {
        for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
        out << '\n';
    }
    out << std::setprecision(17);
    for (Eigen::Index r = 0; r < traj.data.rows(); ++r) {
        for (Eigen::Index c = 0; c < traj.data.cols(); ++c) out << (c ? "," : "") << traj.data(r, c);
        out << '\n';
    }
    require(out.good(), ErrorCode::Filesystem, "write failed for " + path.string());
}

SplitResult split_standardize(const Trajectory& traj, const SplitSpec& spec) {
    for (double f : {spec.train, spec.val, spec.test})
        require(f > 0 && f < 1, ErrorCode::Config, "split fractions must lie in (0, 1)");
    require(std::abs(spec.train + spec.val + spec.test - 1.0) <= 1e-9, ErrorCode::Config,
            "split fractions must sum to 1");

    const std::size_t T = traj.steps();
    const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(T) * spec.train));
    const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(T) * spec.val));
    require(n_train + n_val < T, ErrorCode::Config, "split leaves no test rows");
    const std::size_t n_test = T - n_train - n_val;
    require(n_train >= 2 && n_val >= 2 && n_test >= 2, ErrorCode::Config,
            "each split segment needs at least 2 rows");

    SplitResult out;
    out.train = traj.slice(0, n_train);
    out.val = traj.slice(n_train, n_val);
    out.test = traj.slice(n_train + n_val, n_test);

    out.mean = out.train.data.colwise().mean().transpose();
    Matrix centered = out.train.data.rowwise() - out.mean.transpose();
    out.std = (centered.colwise().squaredNorm() / static_cast<double>(n_train)).cwiseSqrt().transpose();
    for (Eigen::Index c = 0; c < out.std.size(); ++c)
        if (out.std[c] == 0.0) out.std[c] = 1.0;

    for (Trajectory* seg : {&out.train, &out.val, &out.test}) {
        seg->data = (seg->data.rowwise() - out.mean.transpose()).array().rowwise() / out.std.transpose().array();
    }
    return out;
}

}  // namespace hcr
