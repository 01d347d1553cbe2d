#include "hcr/harness.hpp"

#include <cmath>
#include <sstream>

namespace hcr {

namespace fs = std::filesystem;

namespace {

struct Artifact {
    const char* file;
    const char* stage;
};

constexpr Artifact kNeeded[] = {
    {"sets.json", "rashomon_sets"},
    {"contraction.json", "contraction"},
    {"multiplicity.json", "multiplicity"},
    {"selection.json", "select"},
    {"lyapunov.json", "lyapunov"},
};

void check_artifacts(const fs::path& dir) {
    std::ostringstream missing;
    bool any = false;
    for (const auto& a : kNeeded)
        if (!fs::exists(dir / a.file)) {
            missing << "\n  " << (dir / a.file).string() << " (stage '" << a.stage << "')";
            any = true;
        }
    if (any)
        fail(ErrorCode::MissingArtifact,
             "cannot build the report; missing artifacts:" + missing.str() +
                 "\nrerun `pipeline` with this output directory (or `select` when only selection outputs are missing)");
}

double as_number(const Json& v) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    }
    fail(ErrorCode::Parse, "expected a number, got " + v.dump());
}

std::string num(double x) { return format_number(x); }

struct RunSummary {
    double lambda = 0;
    std::optional<double> oracle;
    std::optional<double> rate;
    std::optional<double> r2;
    std::size_t size_at_k20 = 0;
};

RunSummary report_run(const fs::path& dir) {
    check_artifacts(dir);
    const fs::path out = dir / "report";
    try {
        const Json sets = read_json(dir / "sets.json");
        const Json contraction = read_json(dir / "contraction.json");
        const Json multiplicity = read_json(dir / "multiplicity.json");
        const Json selection = read_json(dir / "selection.json");
        const Json lyap = read_json(dir / "lyapunov.json");

        const auto sizes = sets.at("sizes").get<std::vector<std::size_t>>();
        std::vector<std::vector<std::string>> rows;
        for (std::size_t k = 0; k < sizes.size(); ++k)
            rows.push_back({std::to_string(k + 1), std::to_string(sizes[k]),
                            sizes[k] > 0 ? num(std::log(static_cast<double>(sizes[k]))) : "-inf"});
        write_csv(out / "set_size_vs_horizon.csv", {"k", "size", "log_size"}, rows);

        RunSummary s;
        rows.clear();
        const bool fitted = contraction.at("error").is_null();
        for (std::size_t k = 0; k < sizes.size(); ++k) {
            const int kk = static_cast<int>(k + 1);
            std::string fit = "";
            if (fitted)
                fit = num(contraction.at("intercept").get<double>() - contraction.at("beta_lambda_hat").get<double>() * kk);
            const auto used = contraction.at("k_used").get<std::vector<int>>();
            const bool in_fit = std::find(used.begin(), used.end(), kk) != used.end();
            rows.push_back({std::to_string(kk),
                            sizes[k] > 0 ? num(std::log(static_cast<double>(sizes[k]))) : "-inf", fit,
                            in_fit ? "1" : "0"});
        }
        write_csv(out / "contraction_fit.csv", {"k", "log_size", "fitted_log_size", "used_in_fit"}, rows);
        if (fitted) {
            s.rate = contraction.at("beta_lambda_hat").get<double>();
            s.r2 = contraction.at("r2").get<double>();
        }

        rows.clear();
        for (const auto& h : selection.at("per_horizon"))
            rows.push_back({std::to_string(h.at("k").get<int>()), num(as_number(h.at("decision_aligned"))),
                            num(as_number(h.at("single_best"))), num(as_number(h.at("ensemble"))),
                            num(as_number(h.at("random_mean"))), num(as_number(h.at("oracle")))});
        write_csv(out / "utility_by_strategy.csv",
                  {"k", "decision_aligned", "single_best", "ensemble", "random_mean", "oracle"}, rows);

        const Json& agreement = multiplicity.at("agreement");
        std::vector<std::string> header{"k"};
        for (std::size_t j = 0; j < agreement.size(); ++j) header.push_back("k" + std::to_string(j + 1));
        rows.clear();
        for (std::size_t i = 0; i < agreement.size(); ++i) {
            std::vector<std::string> r{std::to_string(i + 1)};
            for (const auto& v : agreement[i]) r.push_back(num(as_number(v)));
            rows.push_back(std::move(r));
        }
        write_csv(out / "agreement.csv", header, rows);

        s.lambda = lyap.at("lambda_max").get<double>();
        if (!lyap.at("oracle").is_null()) s.oracle = lyap.at("oracle").at("lambda_max").get<double>();
        const std::size_t k20 = std::min<std::size_t>(20, sizes.size());
        s.size_at_k20 = k20 > 0 ? sizes[k20 - 1] : 0;
        return s;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Parse, "malformed pipeline output in " + dir.string() + ": " + e.what());
    }
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : ""; }

}  // namespace

void cmd_report(const fs::path& dir) {
    require(fs::is_directory(dir), ErrorCode::MissingArtifact,
            "no pipeline output at " + dir.string() + "; run `pipeline` first");
    if (!fs::exists(dir / "sweep.json")) {
        report_run(dir);
        return;
    }
    const Json sweep = read_json(dir / "sweep.json");
    std::vector<std::vector<std::string>> rows;
    const auto values = sweep.at("values").get<std::vector<double>>();
    const auto runs = sweep.at("runs").get<std::vector<std::string>>();
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const RunSummary s = report_run(dir / runs[i]);
        rows.push_back({num(values[i]), num(s.lambda), opt_num(s.oracle), opt_num(s.rate), opt_num(s.r2),
                        std::to_string(s.size_at_k20)});
    }
    write_csv(dir / "report" / "fsweep_summary.csv",
              {"F", "lambda_hat", "lambda_oracle", "contraction_rate", "contraction_r2", "set_size_k20"}, rows);
}

}  // namespace hcr
