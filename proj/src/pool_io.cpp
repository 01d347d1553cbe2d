#include "hcr/reservoir.hpp"
#include "hcr/serialize.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace hcr {

Json to_json(const ReservoirConfig& c) {
    return Json{{"n_r", c.n_r},
                {"rho", c.rho},
                {"sparsity", c.sparsity},
                {"leak", c.leak},
                {"input_scale", c.input_scale},
                {"bias_std", c.bias_std},
                {"ridge_lambda", c.ridge_lambda},
                {"washout", c.washout},
                {"seed", c.seed},
                {"window", c.window}};
}

ReservoirConfig reservoir_config_from_json(const Json& j) {
    ReservoirConfig c;
    c.n_r = j.at("n_r").get<int>();
    c.rho = j.at("rho").get<double>();
    c.sparsity = j.at("sparsity").get<double>();
    c.leak = j.at("leak").get<double>();
    c.input_scale = j.at("input_scale").get<double>();
    c.bias_std = j.at("bias_std").get<double>();
    c.ridge_lambda = j.at("ridge_lambda").get<double>();
    c.washout = j.at("washout").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.window = j.at("window").get<std::size_t>();
    return c;
}

Json to_json(const GridAxes& a) {
    return Json{{"n_r", a.n_r}, {"rho", a.rho}, {"sparsity", a.sparsity}, {"leak", a.leak}};
}

GridAxes grid_axes_from_json(const Json& j) {
    GridAxes a;
    a.n_r = j.at("n_r").get<std::vector<int>>();
    a.rho = j.at("rho").get<std::vector<double>>();
    a.sparsity = j.at("sparsity").get<std::vector<double>>();
    a.leak = j.at("leak").get<std::vector<double>>();
    return a;
}

Json matrix_to_json(const Matrix& m) {
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const double x = m(r, c);
            if (std::isfinite(x)) row.push_back(x);
            else row.push_back(x > 0 ? "inf" : (x < 0 ? "-inf" : "nan"));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

Json vector_to_json(const Vector& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

void write_json(const std::filesystem::path& path, const Json& j) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path);
    require(out.good(), ErrorCode::Filesystem, "cannot write " + path.string());
    out << j.dump(2) << '\n';
    require(out.good(), ErrorCode::Filesystem, "write failed for " + path.string());
}

Json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::MissingArtifact, "cannot read " + path.string());
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Parse, path.string() + ": " + e.what());
    }
}

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

namespace {

constexpr char kMagic[8] = {'H', 'C', 'R', 'M', 'O', 'D', 'E', 'L'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4] = {};
    in.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

// Little-endian IEEE-754 binary64, independent of host byte order.
void put_doubles(std::ostream& out, const double* data, std::size_t n) {
    std::vector<unsigned char> buf(n * 8);
    for (std::size_t i = 0; i < n; ++i) {
        const auto bits = std::bit_cast<std::uint64_t>(data[i]);
        for (int k = 0; k < 8; ++k) buf[i * 8 + k] = static_cast<unsigned char>(bits >> (8 * k));
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

void get_doubles(std::istream& in, double* data, std::size_t n) {
    std::vector<unsigned char> buf(n * 8);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    require(in.good(), ErrorCode::Parse, "truncated model file");
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t bits = 0;
        for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(buf[i * 8 + k]) << (8 * k);
        data[i] = std::bit_cast<double>(bits);
    }
}

std::string model_file_name(std::size_t i) {
    std::ostringstream os;
    os << "model_" << std::setw(4) << std::setfill('0') << i << ".bin";
    return os.str();
}

void save_model(const PoolEntry& entry, const std::filesystem::path& path) {
    const ReservoirModel& m = entry.model;
    Json header{{"config", to_json(m.config)},
                {"status", entry.ok ? "ok" : "failed"},
                {"error", entry.error},
                {"input_dim", m.input_dim},
                {"layout", "float64 little-endian row-major: w_res[n_r,n_r], w_in[n_r,d], bias[n_r], w_out[n_r,d]"},
                {"trained", entry.ok && m.trained()}};
    std::ofstream out(path, std::ios::binary);
    require(out.good(), ErrorCode::Filesystem, "cannot write " + path.string());
    const std::string text = header.dump();
    out.write(kMagic, 8);
    put_u32(out, kFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (entry.ok && m.trained()) {
        Matrix dense_res = Matrix(m.w_res);
        put_doubles(out, dense_res.data(), static_cast<std::size_t>(dense_res.size()));
        put_doubles(out, m.w_in.data(), static_cast<std::size_t>(m.w_in.size()));
        put_doubles(out, m.bias.data(), static_cast<std::size_t>(m.bias.size()));
        put_doubles(out, m.w_out->data(), static_cast<std::size_t>(m.w_out->size()));
    }
    require(out.good(), ErrorCode::Filesystem, "write failed for " + path.string());
}

PoolEntry load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorCode::MissingArtifact, "cannot read " + path.string());
    char magic[8] = {};
    in.read(magic, 8);
    require(in.good() && std::memcmp(magic, kMagic, 8) == 0, ErrorCode::Parse, path.string() + ": not a model file");
    const std::uint32_t version = get_u32(in);
    require(version == kFormatVersion, ErrorCode::Parse, path.string() + ": unsupported model format version");
    const std::uint32_t len = get_u32(in);
    std::string text(len, '\0');
    in.read(text.data(), len);
    require(in.good(), ErrorCode::Parse, path.string() + ": truncated header");
    const Json header = Json::parse(text);

    PoolEntry entry;
    entry.model.config = reservoir_config_from_json(header.at("config"));
    entry.model.input_dim = header.at("input_dim").get<int>();
    entry.ok = header.at("status") == "ok";
    entry.error = header.at("error").get<std::string>();
    if (header.at("trained").get<bool>()) {
        const int n = entry.model.config.n_r;
        const int d = entry.model.input_dim;
        Matrix dense_res(n, n);
        get_doubles(in, dense_res.data(), static_cast<std::size_t>(dense_res.size()));
        entry.model.w_res = dense_res.sparseView(0.0, 0.0);
        entry.model.w_res.makeCompressed();
        entry.model.w_in.resize(n, d);
        get_doubles(in, entry.model.w_in.data(), static_cast<std::size_t>(entry.model.w_in.size()));
        entry.model.bias.resize(n);
        get_doubles(in, entry.model.bias.data(), static_cast<std::size_t>(n));
        Matrix w_out(n, d);
        get_doubles(in, w_out.data(), static_cast<std::size_t>(w_out.size()));
        entry.model.w_out = std::move(w_out);
    }
    return entry;
}

}  // namespace

void save_pool(const ModelPool& pool, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    require(!ec, ErrorCode::Filesystem, "cannot create " + dir.string() + ": " + ec.message());
    Json models = Json::array();
    for (std::size_t i = 0; i < pool.entries.size(); ++i) {
        const auto& e = pool.entries[i];
        const std::string file = model_file_name(i);
        save_model(e, dir / file);
        models.push_back(Json{{"index", i},
                              {"file", file},
                              {"status", e.ok ? "ok" : "failed"},
                              {"error", e.error},
                              {"config", to_json(e.model.config)}});
    }
    write_json(dir / "manifest.json", Json{{"format", "hcr-pool"},
                                           {"version", kFormatVersion},
                                           {"master_seed", pool.master_seed},
                                           {"grid_axes", to_json(pool.axes)},
                                           {"models", models}});
}

ModelPool load_pool(const std::filesystem::path& dir) {
    const Json manifest = read_json(dir / "manifest.json");
    require(manifest.value("format", "") == "hcr-pool", ErrorCode::Parse, "not a pool manifest");
    ModelPool pool;
    pool.master_seed = manifest.at("master_seed").get<std::uint64_t>();
    pool.axes = grid_axes_from_json(manifest.at("grid_axes"));
    for (const auto& m : manifest.at("models")) pool.entries.push_back(load_model(dir / m.at("file").get<std::string>()));
    return pool;
}

}  // namespace hcr
