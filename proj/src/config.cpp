#include "hcr/harness.hpp"

#include <fstream>
#include <set>

namespace hcr {

namespace {

void check_keys(const Json& obj, const std::set<std::string>& allowed, const std::string& where) {
    require(obj.is_object(), ErrorCode::Config, where + " must be an object");
    for (const auto& [key, _] : obj.items())
        require(allowed.count(key) > 0, ErrorCode::Config, "unknown key '" + key + "' in " + where);
}

template <class T>
T get_or(const Json& obj, const char* key, T fallback) {
    if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
    return obj.at(key).get<T>();
}

template <class T>
std::optional<T> get_opt(const Json& obj, const char* key) {
    if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
    return obj.at(key).get<T>();
}

Vector to_vector(const Json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

template <class T>
Json opt_json(const std::optional<T>& v) {
    return v ? Json(*v) : Json(nullptr);
}

void parse_system(const Json& j, ExperimentConfig& cfg) {
    const std::string kind = j.at("kind").get<std::string>();
    SimulationOptions& sim = cfg.system.sim;
    const std::set<std::string> sampling{"kind", "dt", "substeps", "steps", "transient", "seed"};
    if (kind == "lorenz96") {
        auto keys = sampling;
        keys.insert({"d", "F"});
        check_keys(j, keys, "system");
        cfg.system.spec = Lorenz96Params{get_or(j, "d", 5), get_or(j, "F", 10.0)};
        sim = SimulationOptions{get_or(j, "dt", 0.05), get_or(j, "substeps", 5), get_or<std::size_t>(j, "steps", 10000),
                                get_or<std::size_t>(j, "transient", 2000), 0};
    } else if (kind == "ks") {
        auto keys = sampling;
        keys.insert({"grid_points", "length"});
        check_keys(j, keys, "system");
        const KsParams def;
        cfg.system.spec = KsParams{get_or(j, "grid_points", def.grid_points), get_or(j, "length", def.length)};
        sim = SimulationOptions{get_or(j, "dt", 0.25), get_or(j, "substeps", 1), get_or<std::size_t>(j, "steps", 10000),
                                get_or<std::size_t>(j, "transient", 1000), 0};
        // Each KS step costs an FFT round trip per stage, so the long default would take hours.
        cfg.lyapunov.steps = 20000;
        cfg.lyapunov.oracle_steps = 20000;
    } else if (kind == "logistic") {
        auto keys = sampling;
        keys.insert("r");
        check_keys(j, keys, "system");
        cfg.system.spec = LogisticParams{get_or(j, "r", 4.0)};
        sim = SimulationOptions{get_or(j, "dt", 1.0), get_or(j, "substeps", 1), get_or<std::size_t>(j, "steps", 10000),
                                get_or<std::size_t>(j, "transient", 1000), 0};
        require(sim.dt == 1.0 && sim.substeps == 1, ErrorCode::Config, "the logistic map is sampled every iterate (dt = 1)");
    } else if (kind == "csv") {
        check_keys(j, {"kind", "path", "dt"}, "system");
        cfg.system.spec = ExternalSource{j.at("path").get<std::string>()};
        sim = SimulationOptions{get_or(j, "dt", 1.0), 1, 1, 0, 0};
    } else {
        fail(ErrorCode::Config, "unknown system kind '" + kind + "' (expected lorenz96, ks, logistic or csv)");
    }
    cfg.system.seed = get_opt<std::uint64_t>(j, "seed");
}

Json system_json(const ExperimentConfig& cfg) {
    const SimulationOptions sim = cfg.simulation();
    Json j;
    if (const auto* l = std::get_if<Lorenz96Params>(&cfg.system.spec))
        j = Json{{"kind", "lorenz96"}, {"d", l->dim}, {"F", l->forcing}};
    else if (const auto* k = std::get_if<KsParams>(&cfg.system.spec))
        j = Json{{"kind", "ks"}, {"grid_points", k->grid_points}, {"length", k->length}};
    else if (const auto* g = std::get_if<LogisticParams>(&cfg.system.spec))
        j = Json{{"kind", "logistic"}, {"r", g->r}};
    else
        return Json{{"kind", "csv"}, {"path", std::get<ExternalSource>(cfg.system.spec).path}, {"dt", sim.dt}};
    j["dt"] = sim.dt;
    j["substeps"] = sim.substeps;
    j["steps"] = sim.steps;
    j["transient"] = sim.transient;
    j["seed"] = sim.seed;
    return j;
}

UtilityFn parse_utility(const Json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    const auto channels = get_or(j, "channels", std::vector<int>{0});
    if (kind == "quadratic") {
        check_keys(j, {"kind", "scale", "channels"}, "decision.utility");
        return UtilityFn::quadratic(get_or(j, "scale", 1.0), channels);
    }
    if (kind == "asymmetric") {
        check_keys(j, {"kind", "over_cost", "under_cost", "sharpness", "channels"}, "decision.utility");
        UtilityFn u = UtilityFn::asymmetric(get_or(j, "over_cost", 2.0), get_or(j, "under_cost", 1.0), channels);
        u.sharpness = get_or(j, "sharpness", 50.0);
        return u;
    }
    if (kind == "table") {
        check_keys(j, {"kind", "offset", "weight", "channels"}, "decision.utility");
        std::vector<Vector> weight;
        if (j.contains("weight"))
            for (const auto& w : j.at("weight")) weight.push_back(to_vector(w));
        return UtilityFn::table(j.at("offset").get<std::vector<double>>(), weight, channels);
    }
    fail(ErrorCode::Config, "unknown utility kind '" + kind + "' (expected quadratic, asymmetric or table)");
}

Json utility_json(const UtilityFn& u) {
    Json j{{"kind", utility_kind_name(u.kind)}};
    switch (u.kind) {
        case UtilityFn::Kind::Quadratic: j["scale"] = u.scale; break;
        case UtilityFn::Kind::Asymmetric:
            j["over_cost"] = u.over_cost;
            j["under_cost"] = u.under_cost;
            j["sharpness"] = u.sharpness;
            break;
        case UtilityFn::Kind::Table: {
            j["offset"] = u.table_offset;
            Json w = Json::array();
            for (const auto& v : u.table_weight) w.push_back(vector_to_json(v));
            j["weight"] = w;
            break;
        }
    }
    j["channels"] = u.channels;
    return j;
}

ActionSpace parse_space(const Json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "box") {
        check_keys(j, {"kind", "lower", "upper"}, "decision.action_space");
        return ActionSpace::box(to_vector(j.at("lower")), to_vector(j.at("upper")));
    }
    if (kind == "discrete") {
        check_keys(j, {"kind", "actions"}, "decision.action_space");
        std::vector<Vector> actions;
        for (const auto& a : j.at("actions")) actions.push_back(to_vector(a));
        return ActionSpace::discrete(actions);
    }
    fail(ErrorCode::Config, "unknown action space kind '" + kind + "' (expected box or discrete)");
}

Json space_json(const ActionSpace& s) {
    if (s.kind == ActionSpace::Kind::Box)
        return Json{{"kind", "box"}, {"lower", vector_to_json(s.lower)}, {"upper", vector_to_json(s.upper)}};
    Json actions = Json::array();
    for (const auto& a : s.actions) actions.push_back(vector_to_json(a));
    return Json{{"kind", "discrete"}, {"actions", actions}};
}

void parse_decision(const Json& j, DecisionSetup& d) {
    check_keys(j,
               {"utility", "action_space", "p_k", "sample_size", "optimizer", "random_repeats", "sweep_sizes",
                "sweep_repeats", "cem", "gradient"},
               "decision");
    if (j.contains("utility")) d.utility = parse_utility(j.at("utility"));
    if (j.contains("action_space")) d.space = parse_space(j.at("action_space"));
    if (j.contains("p_k") && !j.at("p_k").is_null()) {
        if (j.at("p_k").is_string()) {
            require(j.at("p_k") == "uniform", ErrorCode::Config, "p_k must be \"uniform\" or a list");
            d.p_k.reset();
        } else {
            d.p_k = to_vector(j.at("p_k"));
        }
    }
    d.sample_size = get_or(j, "sample_size", d.sample_size);
    if (j.contains("optimizer")) d.optimizer.kind = parse_optimizer(j.at("optimizer").get<std::string>());
    d.random_repeats = get_or(j, "random_repeats", d.random_repeats);
    d.sweep_sizes = get_or(j, "sweep_sizes", d.sweep_sizes);
    d.sweep_repeats = get_or(j, "sweep_repeats", d.sweep_repeats);
    if (j.contains("cem")) {
        const Json& c = j.at("cem");
        check_keys(c, {"population", "elite_frac", "generations", "seed"}, "decision.cem");
        d.optimizer.cem.population = get_or(c, "population", d.optimizer.cem.population);
        d.optimizer.cem.elite_frac = get_or(c, "elite_frac", d.optimizer.cem.elite_frac);
        d.optimizer.cem.generations = get_or(c, "generations", d.optimizer.cem.generations);
        d.optimizer.cem.seed = get_or(c, "seed", d.optimizer.cem.seed);
    }
    if (j.contains("gradient")) {
        const Json& g = j.at("gradient");
        check_keys(g, {"step", "iters", "final_step_ratio"}, "decision.gradient");
        d.optimizer.gradient.step = get_or(g, "step", d.optimizer.gradient.step);
        d.optimizer.gradient.iters = get_or(g, "iters", d.optimizer.gradient.iters);
        d.optimizer.gradient.final_step_ratio = get_or(g, "final_step_ratio", d.optimizer.gradient.final_step_ratio);
    }
}

void parse_lyapunov(const Json& j, LyapunovConfig& l) {
    check_keys(j, {"steps", "oracle_steps", "m", "tau", "theiler", "j_max", "refs", "tau_max", "m_max", "full_state"},
               "lyapunov");
    l.steps = get_or(j, "steps", l.steps);
    l.oracle_steps = get_or(j, "oracle_steps", l.oracle_steps);
    l.options.m = get_opt<int>(j, "m");
    l.options.tau = get_opt<int>(j, "tau");
    l.options.theiler = get_opt<int>(j, "theiler");
    l.options.j_max = get_opt<std::size_t>(j, "j_max");
    l.options.refs = get_opt<std::size_t>(j, "refs");
    l.options.tau_max = get_or(j, "tau_max", l.options.tau_max);
    l.options.m_max = get_or(j, "m_max", l.options.m_max);
    l.options.full_state = get_or(j, "full_state", l.options.full_state);
}

void parse_grid(const Json& j, ExperimentConfig& cfg) {
    if (j.is_string()) {
        const auto name = j.get<std::string>();
        require(name == "desk" || name == "full", ErrorCode::Config, "grid preset must be desk or full");
        cfg.grid_preset = name;
        cfg.grid = name == "desk" ? GridAxes::desk() : GridAxes::full();
        return;
    }
    check_keys(j, {"n_r", "rho", "sparsity", "leak"}, "grid");
    cfg.grid_preset = "custom";
    cfg.grid = grid_axes_from_json(j);
}

}  // namespace

std::uint64_t SystemConfig::effective_seed(std::uint64_t master) const { return seed ? *seed : derive_seed(master, 0x5157); }

SimulationOptions ExperimentConfig::simulation() const {
    SimulationOptions s = system.sim;
    s.seed = system.effective_seed(master_seed);
    return s;
}

Vector ExperimentConfig::p_k() const {
    if (decision.p_k) return *decision.p_k;
    return Vector::Constant(horizons, 1.0 / horizons);
}

std::pair<std::size_t, std::size_t> ExperimentConfig::band() const {
    const bool small = grid.size() < 200;
    return {rashomon.band_lo.value_or(small ? 5 : 10), rashomon.band_hi.value_or(small ? 50 : 100)};
}

void ExperimentConfig::validate() const {
    validate_system(system.spec);
    require(system.sim.dt > 0 && system.sim.substeps >= 1 && system.sim.steps >= 1, ErrorCode::Config,
            "system sampling options are invalid");
    require(split.train > 0 && split.val > 0 && split.test > 0 && std::abs(split.train + split.val + split.test - 1) < 1e-9,
            ErrorCode::Config, "split fractions must be positive and sum to 1");
    require(grid.size() >= 1, ErrorCode::Config, "grid is empty");
    ReservoirConfig probe = reservoir;
    for (int n : grid.n_r)
        for (double rho : grid.rho)
            for (double p : grid.sparsity)
                for (double a : grid.leak) {
                    probe.n_r = n;
                    probe.rho = rho;
                    probe.sparsity = p;
                    probe.leak = a;
                    hcr::validate(probe);
                }
    require(horizons >= 1, ErrorCode::Config, "horizons must be >= 1");
    require(warmup >= kMinWarmup, ErrorCode::Config, "warmup must be >= " + std::to_string(kMinWarmup));
    const auto [lo, hi] = band();
    require(lo <= hi, ErrorCode::Config, "rashomon band is empty");
    if (!rashomon.calibrate)
        require(rashomon.alpha > 0 && rashomon.alpha < 1 && rashomon.beta >= 0 && rashomon.gamma >= 0, ErrorCode::Config,
                "rashomon schedule needs 0 < alpha < 1 and beta, gamma >= 0");
    DecisionConfig dc{p_k(), 0.0, system.sim.dt};
    dc.validate(horizons);
    decision.space.validate();
    const int state_dim = [&] {
        if (const auto* l = std::get_if<Lorenz96Params>(&system.spec)) return l->dim;
        if (const auto* k = std::get_if<KsParams>(&system.spec)) return k->grid_points;
        if (std::holds_alternative<LogisticParams>(system.spec)) return 1;
        return std::numeric_limits<int>::max();
    }();
    decision.utility.validate(state_dim);
    require(decision.sample_size >= 1, ErrorCode::Config, "sample_size must be >= 1");
    require(decision.random_repeats >= 2, ErrorCode::Config, "random_repeats must be >= 2");
    require(!decision.sweep_sizes.empty() &&
                std::is_sorted(decision.sweep_sizes.begin(), decision.sweep_sizes.end()) &&
                decision.sweep_sizes.front() >= 1,
            ErrorCode::Config, "sweep_sizes must be ascending and >= 1");
    require(threads >= 1, ErrorCode::Config, "threads must be >= 1");
    if (!sweep_forcing.empty())
        require(std::holds_alternative<Lorenz96Params>(system.spec), ErrorCode::Config,
                "a forcing sweep needs a lorenz96 system");
}

Json ExperimentConfig::echo() const {
    const auto [lo, hi] = band();
    Json rashomon_json = rashomon.calibrate
                             ? Json{{"band", {lo, hi}}}
                             : Json{{"schedule", {{"alpha", rashomon.alpha}, {"beta", rashomon.beta}, {"gamma", rashomon.gamma}}}};
    const auto& lo_opt = lyapunov.options;
    Json p = Json::array();
    const Vector pk = p_k();
    for (Eigen::Index k = 0; k < pk.size(); ++k) p.push_back(pk[k]);
    Json j{{"system", system_json(*this)},
           {"split", {{"train", split.train}, {"val", split.val}, {"test", split.test}}},
           {"grid", grid_preset == "custom" ? to_json(grid) : Json(grid_preset)},
           {"reservoir",
            {{"input_scale", reservoir.input_scale},
             {"bias_std", reservoir.bias_std},
             {"ridge_lambda", reservoir.ridge_lambda},
             {"washout", reservoir.washout}}},
           {"horizons", horizons},
           {"warmup", warmup},
           {"rashomon", rashomon_json},
           {"lyapunov",
            {{"steps", lyapunov.steps},
             {"oracle_steps", lyapunov.oracle_steps},
             {"m", opt_json(lo_opt.m)},
             {"tau", opt_json(lo_opt.tau)},
             {"theiler", opt_json(lo_opt.theiler)},
             {"j_max", lo_opt.j_max.value_or(kDefaultJMax)},
             {"refs", lo_opt.refs.value_or(kDefaultReferences)},
             {"tau_max", lo_opt.tau_max},
             {"m_max", lo_opt.m_max},
             {"full_state", lo_opt.full_state}}},
           {"decision",
            {{"utility", utility_json(decision.utility)},
             {"action_space", space_json(decision.space)},
             {"p_k", p},
             {"sample_size", decision.sample_size},
             {"optimizer", optimizer_name(decision.optimizer.kind)},
             {"random_repeats", decision.random_repeats},
             {"sweep_sizes", decision.sweep_sizes},
             {"sweep_repeats", decision.sweep_repeats},
             {"cem",
              {{"population", decision.optimizer.cem.population},
               {"elite_frac", decision.optimizer.cem.elite_frac},
               {"generations", decision.optimizer.cem.generations},
               {"seed", decision.optimizer.cem.seed}}},
             {"gradient",
              {{"step", decision.optimizer.gradient.step},
               {"iters", decision.optimizer.gradient.iters},
               {"final_step_ratio", decision.optimizer.gradient.final_step_ratio}}}}},
           {"master_seed", master_seed}};
    if (!sweep_forcing.empty()) j["sweep"] = Json{{"F", sweep_forcing}};
    return j;
}

ExperimentConfig parse_config(const Json& j) {
    try {
        check_keys(j,
                   {"system", "split", "grid", "reservoir", "horizons", "warmup", "rashomon", "lyapunov", "decision",
                    "master_seed", "output_dir", "threads", "sweep"},
                   "config");
        ExperimentConfig cfg;
        if (j.contains("system")) parse_system(j.at("system"), cfg);
        if (j.contains("split")) {
            const Json& s = j.at("split");
            check_keys(s, {"train", "val", "test"}, "split");
            cfg.split = SplitSpec{get_or(s, "train", 0.6), get_or(s, "val", 0.2), get_or(s, "test", 0.2)};
        }
        if (j.contains("grid")) parse_grid(j.at("grid"), cfg);
        if (j.contains("reservoir")) {
            const Json& r = j.at("reservoir");
            check_keys(r, {"input_scale", "bias_std", "ridge_lambda", "washout"}, "reservoir");
            cfg.reservoir.input_scale = get_or(r, "input_scale", cfg.reservoir.input_scale);
            cfg.reservoir.bias_std = get_or(r, "bias_std", cfg.reservoir.bias_std);
            cfg.reservoir.ridge_lambda = get_or(r, "ridge_lambda", cfg.reservoir.ridge_lambda);
            cfg.reservoir.washout = get_or(r, "washout", cfg.reservoir.washout);
        }
        cfg.horizons = get_or(j, "horizons", cfg.horizons);
        cfg.warmup = get_or(j, "warmup", cfg.warmup);
        if (j.contains("rashomon")) {
            const Json& r = j.at("rashomon");
            check_keys(r, {"band", "schedule"}, "rashomon");
            require(!(r.contains("band") && r.contains("schedule")), ErrorCode::Config,
                    "rashomon takes either a band or a schedule, not both");
            if (r.contains("schedule")) {
                const Json& s = r.at("schedule");
                check_keys(s, {"alpha", "beta", "gamma"}, "rashomon.schedule");
                cfg.rashomon.calibrate = false;
                cfg.rashomon.alpha = s.at("alpha").get<double>();
                cfg.rashomon.beta = get_or(s, "beta", 0.0);
                cfg.rashomon.gamma = get_or(s, "gamma", 0.0);
            } else if (r.contains("band")) {
                const auto band = r.at("band").get<std::vector<std::size_t>>();
                require(band.size() == 2, ErrorCode::Config, "rashomon.band needs two entries");
                cfg.rashomon.band_lo = band[0];
                cfg.rashomon.band_hi = band[1];
            }
        }
        if (j.contains("lyapunov")) parse_lyapunov(j.at("lyapunov"), cfg.lyapunov);
        if (j.contains("decision")) parse_decision(j.at("decision"), cfg.decision);
        cfg.master_seed = get_or<std::uint64_t>(j, "master_seed", 0);
        if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
        cfg.threads = get_or(j, "threads", 1);
        if (j.contains("sweep")) {
            check_keys(j.at("sweep"), {"F"}, "sweep");
            cfg.sweep_forcing = j.at("sweep").at("F").get<std::vector<double>>();
            require(!cfg.sweep_forcing.empty(), ErrorCode::Config, "sweep.F is empty");
        }
        cfg.validate();
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Config, std::string("invalid config: ") + e.what());
    }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::Config, "cannot read config file " + path.string());
    Json j;
    try {
        j = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Config, path.string() + " is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

void apply_overrides(ExperimentConfig& cfg, const Overrides& o) {
    // Work on a copy so a rejected override leaves cfg untouched.
    ExperimentConfig next = cfg;
    if (o.seed) next.master_seed = *o.seed;
    if (o.out) next.output_dir = *o.out;
    if (o.grid) {
        require(*o.grid == "desk" || *o.grid == "full", ErrorCode::Config, "--grid must be desk or full");
        next.grid_preset = *o.grid;
        next.grid = *o.grid == "desk" ? GridAxes::desk() : GridAxes::full();
    }
    if (o.threads) next.threads = *o.threads;
    next.validate();
    cfg = std::move(next);
}

StageError::StageError(std::string stage, const Error& cause)
    : Error(cause.code(), "stage '" + stage + "' failed: " + cause.what()), stage_(std::move(stage)), cause_(cause.code()) {}

}  // namespace hcr
