#include "hcr/harness.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <random>
#include <sstream>

namespace hcr {

namespace fs = std::filesystem;

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary);
    require(out.good(), ErrorCode::Filesystem, "cannot write " + path.string());
    const auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
        out << '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    require(out.good(), ErrorCode::Filesystem, "failed writing " + path.string());
}

std::vector<std::vector<std::string>> read_csv_rows(const fs::path& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::MissingArtifact, "missing " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

namespace {

std::string num(double x) { return format_number(x); }

std::string timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream ss;
    ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return ss.str();
}

bool synthetic(const SystemSpec& spec) { return !std::holds_alternative<ExternalSource>(spec); }

// Seeds for the individual stages, all derived from the master seed.
constexpr std::uint64_t kPoolStream = 0x9001;
constexpr std::uint64_t kLyapunovStream = 0x1a9;
constexpr std::uint64_t kOracleStream = 0xbe7;
constexpr std::uint64_t kSelectStream = 0x5e1;
constexpr std::uint64_t kSweepStream = 0x5e2;

/// Tracks stage status in manifest.json, rewriting it after every change so a
/// failed run still documents how far it got.
class Run {
public:
    Run(const ExperimentConfig& cfg, fs::path dir) : cfg_(cfg), dir_(std::move(dir)) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        require(!ec && fs::is_directory(dir_), ErrorCode::Filesystem, "cannot create output directory " + dir_.string());
        write_json(dir_ / "config.resolved.json", cfg_.echo());
        manifest_ = Json{{"format", "hcr-run"},
                         {"created", timestamp()},
                         {"master_seed", cfg_.master_seed},
                         {"config", "config.resolved.json"},
                         {"stages", Json::array()}};
        flush();
    }

    const fs::path& dir() const { return dir_; }

    void stage(const std::string& name, const std::function<std::vector<std::string>()>& body) {
        Json entry{{"name", name}, {"status", "running"}};
        manifest_["stages"].push_back(entry);
        Json& slot = manifest_["stages"].back();
        flush();
        try {
            const auto files = body();
            slot["status"] = "ok";
            slot["files"] = files;
            flush();
        } catch (const Error& e) {
            fail_stage(slot, name, e.what());
            throw StageError(name, e);
        } catch (const std::exception& e) {
            fail_stage(slot, name, e.what());
            throw StageError(name, Error(ErrorCode::Stage, e.what()));
        }
    }

    /// Output JSON with the provenance header.
    void emit(const std::string& file, Json body) const {
        Json j{{"master_seed", cfg_.master_seed}, {"config", "config.resolved.json"}};
        for (auto& [k, v] : body.items()) j[k] = v;
        write_json(dir_ / file, j);
    }

private:
    void fail_stage(Json& slot, const std::string& name, const std::string& what) {
        slot["status"] = "failed";
        slot["error"] = what;
        manifest_["failed_stage"] = name;
        flush();
    }
    void flush() const { write_json(dir_ / "manifest.json", manifest_); }

    const ExperimentConfig& cfg_;
    fs::path dir_;
    Json manifest_;
};

Json trajectory_meta(const Trajectory& t, const ExperimentConfig& cfg) {
    return Json{{"source", source_name(t.source)},
                {"rows", t.steps()},
                {"columns", t.dim()},
                {"dt", t.dt},
                {"system_seed", cfg.simulation().seed}};
}

// ---- individual stages ----------------------------------------------------

Trajectory stage_simulate(Run& run, const ExperimentConfig& cfg) {
    Trajectory traj;
    run.stage("simulate", [&] {
        traj = simulate(cfg.system.spec, cfg.simulation());
        traj.validate();
        save_csv(traj, run.dir() / "trajectory.csv");
        run.emit("trajectory.json", trajectory_meta(traj, cfg));
        return std::vector<std::string>{"trajectory.csv", "trajectory.json"};
    });
    return traj;
}

SplitResult stage_split(Run& run, const ExperimentConfig& cfg, const Trajectory& traj) {
    SplitResult split;
    run.stage("split", [&] {
        split = split_standardize(traj, cfg.split);
        run.emit("split.json", Json{{"train_rows", split.train.steps()},
                                    {"val_rows", split.val.steps()},
                                    {"test_rows", split.test.steps()},
                                    {"mean", vector_to_json(split.mean)},
                                    {"std", vector_to_json(split.std)}});
        return std::vector<std::string>{"split.json"};
    });
    return split;
}

ModelPool stage_pool(Run& run, const ExperimentConfig& cfg, const Trajectory& train) {
    ModelPool pool;
    run.stage("train_pool", [&] {
        const auto configs = enumerate_grid(cfg.grid, cfg.reservoir);
        pool = train_pool(configs, train, derive_seed(cfg.master_seed, kPoolStream), cfg.threads, cfg.grid);
        save_pool(pool, run.dir() / "pool");
        return std::vector<std::string>{"pool/manifest.json"};
    });
    return pool;
}

struct LyapunovOutcome {
    LyapunovEstimate estimate;
    std::optional<BenettinResult> oracle;
};

Json lyapunov_json(const LyapunovOutcome& o, std::size_t rows) {
    const auto& e = o.estimate;
    Json j{{"lambda_max", e.lambda_max},
           {"fit_start", e.fit_start},
           {"fit_end", e.fit_end},
           {"r2", e.r2},
           {"low_confidence", e.low_confidence},
           {"tau_fallback", e.tau_fallback},
           {"m", e.params.m},
           {"tau", e.params.tau},
           {"theiler", e.params.theiler},
           {"j_max", e.curve.j_max()},
           {"references", e.curve.pairs.size()},
           {"rows", rows},
           {"dt", e.curve.dt}};
    if (o.oracle)
        j["oracle"] = Json{{"method", "benettin"},
                           {"lambda_max", o.oracle->lambda_max},
                           {"std_error", o.oracle->std_error},
                           {"windows", o.oracle->windows}};
    else
        j["oracle"] = nullptr;
    return j;
}

void write_divergence(const fs::path& path, const LyapunovEstimate& e) {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t j = 0; j < e.curve.d.size(); ++j)
        rows.push_back({std::to_string(j), num(static_cast<double>(j) * e.curve.dt), num(e.curve.d[j]),
                        (j >= e.fit_start && j < e.fit_end) ? "1" : "0"});
    write_csv(path, {"j", "time", "mean_log_divergence", "in_fit"}, rows);
}

LyapunovOutcome stage_lyapunov(Run& run, const ExperimentConfig& cfg, const Trajectory& traj) {
    LyapunovOutcome out;
    run.stage("lyapunov", [&] {
        Trajectory series = traj;
        if (synthetic(cfg.system.spec)) {
            SimulationOptions sim = cfg.simulation();
            sim.steps = cfg.lyapunov.steps;
            sim.seed = derive_seed(sim.seed, kLyapunovStream);
            series = simulate(cfg.system.spec, sim);
        }
        out.estimate = estimate_lyapunov(series, cfg.lyapunov.options);
        if (synthetic(cfg.system.spec) && cfg.lyapunov.oracle_steps > 0) {
            BenettinOptions bo;
            const SimulationOptions sim = cfg.simulation();
            if (!std::holds_alternative<LogisticParams>(cfg.system.spec)) bo.h = sim.dt / sim.substeps;
            out.oracle = benettin_oracle(cfg.system.spec, cfg.lyapunov.oracle_steps,
                                         derive_seed(sim.seed, kOracleStream), bo);
        }
        run.emit("lyapunov.json", lyapunov_json(out, series.steps()));
        write_divergence(run.dir() / "divergence.csv", out.estimate);
        return std::vector<std::string>{"lyapunov.json", "divergence.csv"};
    });
    return out;
}

LyapunovOutcome load_lyapunov(const fs::path& dir) {
    const Json j = read_json(dir / "lyapunov.json");
    LyapunovOutcome o;
    try {
        o.estimate.lambda_max = j.at("lambda_max").get<double>();
        o.estimate.params.m = j.at("m").get<int>();
        o.estimate.params.tau = j.at("tau").get<int>();
        o.estimate.params.theiler = j.at("theiler").get<int>();
        o.estimate.r2 = j.at("r2").get<double>();
        if (!j.at("oracle").is_null())
            o.oracle = BenettinResult{j.at("oracle").at("lambda_max").get<double>(),
                                      j.at("oracle").at("std_error").get<double>(),
                                      j.at("oracle").at("windows").get<std::size_t>()};
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Parse, "lyapunov.json is malformed: " + std::string(e.what()));
    }
    return o;
}

struct Analysis {
    ForecastBank val_bank;
    HorizonLossTable losses;
    EpsilonSchedule schedule;
    RashomonSets sets;
};

void write_losses(const Run& run, const HorizonLossTable& t) {
    std::vector<std::string> header{"model"};
    for (int k = 1; k <= t.horizons(); ++k) header.push_back("k" + std::to_string(k));
    std::vector<std::vector<std::string>> rows;
    for (std::size_t h = 0; h < t.pool_size(); ++h) {
        std::vector<std::string> r{std::to_string(h)};
        for (int k = 0; k < t.horizons(); ++k) r.push_back(num(t.losses(static_cast<Eigen::Index>(h), k)));
        rows.push_back(std::move(r));
    }
    write_csv(run.dir() / "losses.csv", header, rows);
    run.emit("losses.json", Json{{"n_eval", t.n_eval}, {"horizons", t.horizons()}, {"losses", matrix_to_json(t.losses)}});
}

Analysis stage_losses_and_sets(Run& run, const ExperimentConfig& cfg, const ModelPool& pool, const Trajectory& val) {
    Analysis a;
    run.stage("losses", [&] {
        a.val_bank = forecast_bank(pool, val, cfg.horizons, cfg.warmup, cfg.threads);
        a.losses = evaluate_losses(a.val_bank, val);
        write_losses(run, a.losses);
        return std::vector<std::string>{"losses.csv", "losses.json"};
    });
    run.stage("rashomon_sets", [&] {
        const auto [lo, hi] = cfg.band();
        Json cal = nullptr;
        if (cfg.rashomon.calibrate) {
            const Calibration c = calibrate_schedule(a.losses, lo, hi);
            a.schedule = c.schedule;
            cal = Json{{"band", {lo, hi}}, {"out_of_band", c.out_of_band}, {"feasible", c.feasible()}};
        } else {
            a.schedule = epsilon_schedule(a.losses, cfg.rashomon.alpha, cfg.rashomon.beta, cfg.rashomon.gamma);
        }
        a.sets = build_sets(a.losses, a.schedule);
        run.emit("schedule.json", Json{{"alpha", a.schedule.alpha},
                                       {"beta", a.schedule.beta},
                                       {"gamma", a.schedule.gamma},
                                       {"delta", vector_to_json(a.schedule.delta)},
                                       {"eps", vector_to_json(a.schedule.eps)},
                                       {"calibration", cal}});
        Json members = Json::array();
        for (const auto& m : a.sets.members) members.push_back(m);
        run.emit("sets.json", Json{{"pool_size", a.sets.pool_size},
                                   {"sizes", a.sets.sizes()},
                                   {"l_star", vector_to_json(a.sets.l_star)},
                                   {"eps", vector_to_json(a.sets.eps)},
                                   {"members", members}});
        std::vector<std::vector<std::string>> rows;
        const auto sizes = a.sets.sizes();
        for (std::size_t k = 0; k < sizes.size(); ++k) {
            const auto i = static_cast<Eigen::Index>(k);
            rows.push_back({std::to_string(k + 1), std::to_string(sizes[k]), num(a.sets.l_star[i]), num(a.sets.eps[i])});
        }
        write_csv(run.dir() / "sets.csv", {"k", "size", "l_star", "eps"}, rows);
        return std::vector<std::string>{"schedule.json", "sets.json", "sets.csv"};
    });
    return a;
}

void stage_contraction(Run& run, const RashomonSets& sets) {
    run.stage("contraction", [&] {
        Json j;
        try {
            const ContractionFit fit = fit_contraction(sets);
            j = Json{{"beta_lambda_hat", fit.beta_lambda_hat},
                     {"intercept", fit.intercept},
                     {"r2", fit.r2},
                     {"k_used", fit.k_used},
                     {"error", nullptr}};
        } catch (const Error& e) {
            // Too few multi-member horizons is a result, not a failed run.
            if (e.code() != ErrorCode::InsufficientData) throw;
            j = Json{{"beta_lambda_hat", nullptr}, {"intercept", nullptr}, {"r2", nullptr},
                     {"k_used", Json::array()}, {"error", e.what()}};
        }
        run.emit("contraction.json", j);
        return std::vector<std::string>{"contraction.json"};
    });
}

void stage_multiplicity(Run& run, const ExperimentConfig& cfg, const Analysis& a, const Trajectory& val,
                        double lambda) {
    run.stage("multiplicity", [&] {
        const MultiplicityReport m = ambiguity_and_agreement(a.val_bank, a.sets, val, cfg.p_k(), lambda, val.dt);
        std::vector<bool> single = m.singleton;
        Json singles = Json::array();
        for (bool s : single) singles.push_back(s);
        run.emit("multiplicity.json", Json{{"lambda_max", lambda},
                                           {"classical_ratio", m.classical_ratio},
                                           {"rho_l", m.rho_l},
                                           {"weights", vector_to_json(m.weights)},
                                           {"ambiguity", vector_to_json(m.ambiguity)},
                                           {"singleton", singles},
                                           {"ambiguity_eff", m.ambiguity_eff},
                                           {"agreement", matrix_to_json(m.agreement)},
                                           {"agreement_pairs", m.agreement_pairs}});
        return std::vector<std::string>{"multiplicity.json"};
    });
}

void stage_select(Run& run, const ExperimentConfig& cfg, const ModelPool& pool, const Analysis& a,
                  const SplitResult& split, double lambda) {
    run.stage("select", [&] {
        const ForecastBank test_bank = forecast_bank(pool, split.test, cfg.horizons, cfg.warmup, cfg.threads);
        const auto& d = cfg.decision;
        const SelectionContext ctx = make_selection_context(a.val_bank, split.val, test_bank, split.test, a.losses,
                                                            d.utility, d.space, d.optimizer, cfg.threads);
        const DecisionConfig dc{cfg.p_k(), lambda, split.val.dt};
        const std::uint64_t seed = derive_seed(cfg.master_seed, kSelectStream);
        const SelectionResult r = select_model(ctx, a.sets, dc, d.sample_size, seed, d.random_repeats);
        const auto sweep = sample_complexity_sweep(ctx, a.sets, dc, d.sweep_sizes, d.sweep_repeats,
                                                   derive_seed(cfg.master_seed, kSweepStream));

        const auto row_of = [](const Matrix& m, std::size_t h) { return Vector(m.row(static_cast<Eigen::Index>(h)).transpose()); };
        Vector random_k = Vector::Zero(cfg.horizons);
        {
            // Per-horizon mean over the same random draws' candidates.
            for (std::size_t r2 = 0; r2 < d.random_repeats; ++r2) {
                std::mt19937_64 rng(derive_seed(seed, 0x7a000 + r2));
                std::uniform_int_distribution<std::size_t> pick(0, r.candidates.size() - 1);
                random_k += row_of(ctx.u_test, r.candidates[pick(rng)]);
            }
            random_k /= static_cast<double>(d.random_repeats);
        }
        Json per_h = Json::array();
        const Vector chosen_k = row_of(ctx.u_test, r.chosen);
        const Vector single_k = row_of(ctx.u_test, r.single_best);
        const Vector oracle_k = row_of(ctx.u_test, r.oracle);
        for (int k = 0; k < cfg.horizons; ++k)
            per_h.push_back(Json{{"k", k + 1},
                                 {"decision_aligned", chosen_k[k]},
                                 {"single_best", single_k[k]},
                                 {"ensemble", r.ensemble_u_k[k]},
                                 {"random_mean", random_k[k]},
                                 {"oracle", oracle_k[k]}});
        run.emit("selection.json",
                 Json{{"lambda_max", lambda},
                      {"k_eff", dc.k_eff()},
                      {"utility", utility_kind_name(d.utility.kind)},
                      {"optimizer", optimizer_name(d.optimizer.kind)},
                      {"candidates", r.candidates},
                      {"fallback", r.fallback},
                      {"sample", r.sample},
                      {"aggregate_val", vector_to_json(r.aggregate)},
                      {"chosen", r.chosen},
                      {"single_best", r.single_best},
                      {"oracle", r.oracle},
                      {"test",
                       {{"decision_aligned", r.chosen_test},
                        {"single_best", r.single_best_test},
                        {"ensemble", r.ensemble_test},
                        {"random_mean", r.random_mean},
                        {"random_std", r.random_std},
                        {"random_t", r.random_t},
                        {"oracle", r.oracle_test}}},
                      {"random_draws", r.random_draws},
                      {"gain_over_single_best", r.gain_over_single_best},
                      {"per_horizon", per_h}});
        std::vector<std::vector<std::string>> rows;
        for (const auto& p : sweep) rows.push_back({std::to_string(p.size), num(p.mean_gap), num(p.std_error)});
        write_csv(run.dir() / "sweep.csv", {"sample_size", "mean_gap", "std_error"}, rows);
        return std::vector<std::string>{"selection.json", "sweep.csv"};
    });
}

double lambda_for_weights(const LyapunovOutcome& o) { return std::max(0.0, o.estimate.lambda_max); }

void run_single(const ExperimentConfig& cfg, const fs::path& dir) {
    Run run(cfg, dir);
    const Trajectory traj = stage_simulate(run, cfg);
    const SplitResult split = stage_split(run, cfg, traj);
    const ModelPool pool = stage_pool(run, cfg, split.train);
    const LyapunovOutcome lyap = stage_lyapunov(run, cfg, traj);
    const Analysis a = stage_losses_and_sets(run, cfg, pool, split.val);
    stage_contraction(run, a.sets);
    const double lambda = lambda_for_weights(lyap);
    stage_multiplicity(run, cfg, a, split.val, lambda);
    stage_select(run, cfg, pool, a, split, lambda);
}

std::string forcing_label(double f) {
    std::ostringstream ss;
    ss << f;
    return "F_" + ss.str();
}

ExperimentConfig with_forcing(const ExperimentConfig& cfg, double f) {
    ExperimentConfig c = cfg;
    std::get<Lorenz96Params>(c.system.spec).forcing = f;
    c.sweep_forcing.clear();
    return c;
}

Trajectory reload_trajectory(const ExperimentConfig& cfg) {
    const fs::path path = cfg.output_dir / "trajectory.csv";
    require(fs::exists(path), ErrorCode::MissingArtifact,
            "missing " + path.string() + "; run `pipeline` (or `simulate`) first");
    return load_csv(path, cfg.simulation().dt);
}

}  // namespace

void cmd_simulate(const ExperimentConfig& cfg) {
    Run run(cfg, cfg.output_dir);
    stage_simulate(run, cfg);
}

void cmd_pipeline(const ExperimentConfig& cfg) {
    if (cfg.sweep_forcing.empty()) {
        run_single(cfg, cfg.output_dir);
        return;
    }
    Run run(cfg, cfg.output_dir);
    std::vector<std::string> dirs;
    for (double f : cfg.sweep_forcing) {
        const std::string label = forcing_label(f);
        run.stage("sweep " + label, [&] {
            run_single(with_forcing(cfg, f), cfg.output_dir / label);
            return std::vector<std::string>{label};
        });
        dirs.push_back(label);
    }
    run.emit("sweep.json", Json{{"parameter", "F"}, {"values", cfg.sweep_forcing}, {"runs", dirs}});
}

void cmd_lyapunov(const ExperimentConfig& cfg) {
    Run run(cfg, cfg.output_dir);
    const Trajectory traj = synthetic(cfg.system.spec) ? Trajectory{} : simulate(cfg.system.spec, cfg.simulation());
    stage_lyapunov(run, cfg, traj);
}

void cmd_select(const ExperimentConfig& cfg) {
    const fs::path pool_dir = cfg.output_dir / "pool";
    require(fs::exists(pool_dir / "manifest.json"), ErrorCode::MissingArtifact,
            "missing " + (pool_dir / "manifest.json").string() + "; run `pipeline` first");
    require(fs::exists(cfg.output_dir / "lyapunov.json"), ErrorCode::MissingArtifact,
            "missing " + (cfg.output_dir / "lyapunov.json").string() + "; run `lyapunov` or `pipeline` first");
    const Trajectory traj = reload_trajectory(cfg);
    const ModelPool pool = load_pool(pool_dir);
    const LyapunovOutcome lyap = load_lyapunov(cfg.output_dir);
    Run run(cfg, cfg.output_dir);
    const SplitResult split = stage_split(run, cfg, traj);
    const Analysis a = stage_losses_and_sets(run, cfg, pool, split.val);
    stage_contraction(run, a.sets);
    const double lambda = lambda_for_weights(lyap);
    stage_multiplicity(run, cfg, a, split.val, lambda);
    stage_select(run, cfg, pool, a, split, lambda);
}

}  // namespace hcr
