#include "hcr/decision.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace hcr {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(1 + exp(s z)) / s without overflow.
double softplus(double z, double s) {
    const double sz = s * z;
    return sz > 0 ? z + std::log1p(std::exp(-sz)) / s : std::log1p(std::exp(sz)) / s;
}

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

void check_compatible(const UtilityFn& u, const ActionSpace& space) {
    space.validate();
    if (u.kind == UtilityFn::Kind::Table) {
        require(space.kind == ActionSpace::Kind::Discrete, ErrorCode::Config, "a table utility needs a discrete action space");
        require(space.actions.size() == u.table_offset.size(), ErrorCode::Config,
                "table utility and action space list different numbers of actions");
        for (std::size_t i = 0; i < space.actions.size(); ++i)
            require(space.actions[i].size() == 1 && space.actions[i][0] == static_cast<double>(i), ErrorCode::Config,
                    "table utility actions must be the indices 0..n-1");
    } else {
        require(space.dim() == static_cast<int>(u.channels.size()), ErrorCode::Config,
                "action dimension must equal the number of utility channels");
    }
}

std::size_t elite_count(const CemOptions& o) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(o.elite_frac * o.population)));
}

// Indices of `scores` ordered best first; equal scores keep index order.
std::vector<std::size_t> rank_desc(const std::vector<double>& scores) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return idx;
}

ActionResult cem_box(const UtilityFn& u, const Vector& xhat, const ActionSpace& space, const CemOptions& o) {
    std::mt19937_64 rng(o.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const Eigen::Index n = space.lower.size();
    Vector mean = 0.5 * (space.lower + space.upper);
    Vector sd = 0.5 * (space.upper - space.lower);
    const std::size_t elites = elite_count(o);

    ActionResult best{mean, u(xhat, mean), 0};
    std::vector<Vector> samples(static_cast<std::size_t>(o.population));
    std::vector<double> scores(samples.size());
    for (int gen = 1; gen <= o.generations; ++gen) {
        best.iterations = gen;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            Vector a(n);
            for (Eigen::Index c = 0; c < n; ++c) a[c] = mean[c] + sd[c] * normal(rng);
            samples[i] = space.clamp(a);
            scores[i] = u(xhat, samples[i]);
        }
        const auto order = rank_desc(scores);
        if (scores[order[0]] > best.utility) best = {samples[order[0]], scores[order[0]], gen};
        // Clamping piles draws onto the boundary; counting each distinct sample
        // once keeps those copies from filling the elite set and collapsing the
        // variance before an interior optimum is reached.
        std::vector<std::size_t> elite;
        for (std::size_t i : order) {
            if (elite.size() == elites) break;
            bool repeat = false;
            for (std::size_t e : elite) repeat = repeat || samples[e] == samples[i];
            if (!repeat) elite.push_back(i);
        }
        mean.setZero();
        for (std::size_t e : elite) mean += samples[e];
        mean /= static_cast<double>(elite.size());
        Vector var = Vector::Zero(n);
        for (std::size_t e : elite) var += (samples[e] - mean).array().square().matrix();
        var /= static_cast<double>(elite.size());
        sd = var.array().sqrt().matrix();
        if (var.maxCoeff() < 1e-8) break;
    }
    const double at_mean = u(xhat, mean);
    if (at_mean > best.utility) {
        best.action = mean;
        best.utility = at_mean;
    }
    return best;
}

ActionResult cem_discrete(const UtilityFn& u, const Vector& xhat, const ActionSpace& space, const CemOptions& o) {
    std::mt19937_64 rng(o.seed);
    const std::size_t n = space.actions.size();
    std::vector<double> p(n, 1.0 / static_cast<double>(n));
    std::vector<double> value(n);
    for (std::size_t i = 0; i < n; ++i) value[i] = u(xhat, space.actions[i]);
    const std::size_t elites = elite_count(o);

    ActionResult best{space.actions[0], kNegInf, 0};
    std::size_t best_index = n;
    std::vector<std::size_t> drawn(static_cast<std::size_t>(o.population));
    std::vector<double> scores(drawn.size());
    for (int gen = 1; gen <= o.generations; ++gen) {
        best.iterations = gen;
        std::discrete_distribution<std::size_t> pick(p.begin(), p.end());
        for (std::size_t i = 0; i < drawn.size(); ++i) {
            drawn[i] = pick(rng);
            scores[i] = value[drawn[i]];
        }
        const auto order = rank_desc(scores);
        const std::size_t top = drawn[order[0]];
        if (best_index == n || value[top] > best.utility || (value[top] == best.utility && top < best_index)) {
            best_index = top;
            best.utility = value[top];
        }
        std::fill(p.begin(), p.end(), 0.0);
        for (std::size_t e = 0; e < elites; ++e) p[drawn[order[e]]] += 1.0 / static_cast<double>(elites);
        double var = 0;
        for (double q : p) var = std::max(var, q * (1.0 - q));
        if (var < 1e-8) break;
    }
    best.action = space.actions[best_index];
    return best;
}

Vector center(const ActionSpace& space) { return 0.5 * (space.lower + space.upper); }

}  // namespace

ActionSpace ActionSpace::box(Vector lower, Vector upper) {
    ActionSpace s;
    s.kind = Kind::Box;
    s.lower = std::move(lower);
    s.upper = std::move(upper);
    s.validate();
    return s;
}

ActionSpace ActionSpace::discrete(std::vector<Vector> actions) {
    ActionSpace s;
    s.kind = Kind::Discrete;
    s.actions = std::move(actions);
    s.validate();
    return s;
}

int ActionSpace::dim() const {
    if (kind == Kind::Box) return static_cast<int>(lower.size());
    return actions.empty() ? 0 : static_cast<int>(actions.front().size());
}

void ActionSpace::validate() const {
    if (kind == Kind::Box) {
        require(lower.size() >= 1 && lower.size() == upper.size(), ErrorCode::Config, "box bounds must have equal length >= 1");
        require((lower.array() < upper.array()).all(), ErrorCode::Config, "box needs lower < upper in every coordinate");
    } else {
        require(!actions.empty(), ErrorCode::Config, "discrete action space is empty");
        for (const auto& a : actions)
            require(a.size() == actions.front().size(), ErrorCode::Config, "discrete actions differ in dimension");
    }
}

Vector ActionSpace::clamp(const Vector& a) const {
    if (kind != Kind::Box) return a;
    return a.cwiseMax(lower).cwiseMin(upper);
}

UtilityFn UtilityFn::quadratic(double scale, std::vector<int> channels) {
    UtilityFn u;
    u.kind = Kind::Quadratic;
    u.scale = scale;
    u.channels = std::move(channels);
    return u;
}

UtilityFn UtilityFn::asymmetric(double over_cost, double under_cost, std::vector<int> channels) {
    UtilityFn u;
    u.kind = Kind::Asymmetric;
    u.over_cost = over_cost;
    u.under_cost = under_cost;
    u.channels = std::move(channels);
    return u;
}

UtilityFn UtilityFn::table(std::vector<double> offset, std::vector<Vector> weight, std::vector<int> channels) {
    UtilityFn u;
    u.kind = Kind::Table;
    u.table_offset = std::move(offset);
    u.table_weight = std::move(weight);
    u.channels = std::move(channels);
    return u;
}

const char* utility_kind_name(UtilityFn::Kind k) {
    switch (k) {
        case UtilityFn::Kind::Quadratic: return "quadratic";
        case UtilityFn::Kind::Asymmetric: return "asymmetric";
        case UtilityFn::Kind::Table: return "table";
    }
    return "unknown";
}

void UtilityFn::validate(int state_dim) const {
    require(!channels.empty(), ErrorCode::Config, "utility needs at least one channel");
    for (int c : channels)
        require(c >= 0 && c < state_dim, ErrorCode::Config,
                "utility channel " + std::to_string(c) + " is outside the state dimension " + std::to_string(state_dim));
    switch (kind) {
        case Kind::Quadratic: require(scale > 0, ErrorCode::Config, "quadratic scale must be > 0"); break;
        case Kind::Asymmetric:
            require(over_cost > 0 && under_cost > 0, ErrorCode::Config, "asymmetric costs must be > 0");
            require(sharpness > 0, ErrorCode::Config, "sharpness must be > 0");
            break;
        case Kind::Table:
            require(!table_offset.empty(), ErrorCode::Config, "table utility is empty");
            require(table_weight.empty() || table_weight.size() == table_offset.size(), ErrorCode::Config,
                    "table weights must match the offsets");
            for (const auto& w : table_weight)
                require(w.size() == static_cast<Eigen::Index>(channels.size()), ErrorCode::Config,
                        "table weight length must equal the channel count");
            break;
    }
}

Vector UtilityFn::target(const Vector& x) const {
    Vector t(static_cast<Eigen::Index>(channels.size()));
    for (std::size_t i = 0; i < channels.size(); ++i) t[static_cast<Eigen::Index>(i)] = x[channels[i]];
    return t;
}

double UtilityFn::operator()(const Vector& x, const Vector& a) const {
    switch (kind) {
        case Kind::Quadratic: return -scale * (a - target(x)).squaredNorm();
        case Kind::Asymmetric: {
            const Vector diff = a - target(x);
            double cost = 0;
            for (Eigen::Index i = 0; i < diff.size(); ++i)
                cost += diff[i] > 0 ? over_cost * diff[i] : -under_cost * diff[i];
            return -cost;
        }
        case Kind::Table: {
            const auto i = static_cast<std::size_t>(std::llround(a[0]));
            require(a[0] >= 0 && i < table_offset.size(), ErrorCode::Domain, "table action index out of range");
            return table_offset[i] + (table_weight.empty() ? 0.0 : table_weight[i].dot(target(x)));
        }
    }
    return 0;
}

double UtilityFn::smooth(const Vector& x, const Vector& a) const {
    if (kind != Kind::Asymmetric) return (*this)(x, a);
    const Vector diff = a - target(x);
    double cost = 0;
    for (Eigen::Index i = 0; i < diff.size(); ++i)
        cost += over_cost * softplus(diff[i], sharpness) + under_cost * softplus(-diff[i], sharpness);
    return -cost;
}

Vector UtilityFn::gradient(const Vector& x, const Vector& a) const {
    switch (kind) {
        case Kind::Quadratic: return -2.0 * scale * (a - target(x));
        case Kind::Asymmetric: {
            const Vector diff = a - target(x);
            Vector g(diff.size());
            for (Eigen::Index i = 0; i < diff.size(); ++i)
                g[i] = -over_cost * sigmoid(sharpness * diff[i]) + under_cost * sigmoid(-sharpness * diff[i]);
            return g;
        }
        case Kind::Table: break;
    }
    fail(ErrorCode::Unsupported, "table utilities are not differentiable; use the cem optimizer");
}

ActionResult optimize_action_gradient(const UtilityFn& u, const Vector& xhat, const ActionSpace& space,
                                      const GradientOptions& o) {
    require(space.kind == ActionSpace::Kind::Box, ErrorCode::Unsupported,
            "gradient optimizer needs a continuous box; use cem for discrete actions");
    require(u.kind != UtilityFn::Kind::Table, ErrorCode::Unsupported,
            "table utilities are not differentiable; use the cem optimizer");
    check_compatible(u, space);
    require(o.iters >= 1 && o.step > 0 && o.final_step_ratio > 0, ErrorCode::Config, "invalid gradient options");

    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const Vector lr0 = o.step * (space.upper - space.lower);
    const double decay = std::pow(o.final_step_ratio, 1.0 / o.iters);
    Vector a = center(space);
    Vector m = Vector::Zero(a.size()), v = Vector::Zero(a.size());
    ActionResult best{a, u.smooth(xhat, a), 0};
    double lr_scale = 1.0, p1 = 1.0, p2 = 1.0;
    for (int t = 1; t <= o.iters; ++t) {
        const Vector g = u.gradient(xhat, a);
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g.cwiseProduct(g);
        p1 *= b1;
        p2 *= b2;
        const Vector mhat = m / (1 - p1);
        const Vector vhat = v / (1 - p2);
        a = space.clamp(a + lr_scale * lr0.cwiseProduct(mhat.cwiseQuotient((vhat.array().sqrt() + eps).matrix())));
        lr_scale *= decay;
        const double val = u.smooth(xhat, a);
        if (val > best.utility) best = {a, val, t};
    }
    best.utility = u(xhat, best.action);
    return best;
}

ActionResult optimize_action_cem(const UtilityFn& u, const Vector& xhat, const ActionSpace& space,
                                 const CemOptions& o) {
    check_compatible(u, space);
    require(o.population >= 1 && o.generations >= 1 && o.elite_frac > 0 && o.elite_frac <= 1, ErrorCode::Config,
            "invalid cem options");
    return space.kind == ActionSpace::Kind::Box ? cem_box(u, xhat, space, o) : cem_discrete(u, xhat, space, o);
}

ActionResult optimize_action_exhaustive(const UtilityFn& u, const Vector& xhat, const ActionSpace& space) {
    check_compatible(u, space);
    require(space.kind == ActionSpace::Kind::Discrete, ErrorCode::Unsupported, "exhaustive search needs a discrete space");
    ActionResult best{space.actions[0], u(xhat, space.actions[0]), 1};
    for (std::size_t i = 1; i < space.actions.size(); ++i) {
        const double val = u(xhat, space.actions[i]);
        if (val > best.utility) best = {space.actions[i], val, 1};
    }
    return best;
}

OptimizerKind parse_optimizer(const std::string& name) {
    if (name == "auto") return OptimizerKind::Auto;
    if (name == "gradient") return OptimizerKind::Gradient;
    if (name == "cem") return OptimizerKind::Cem;
    if (name == "exhaustive") return OptimizerKind::Exhaustive;
    fail(ErrorCode::Config, "unknown optimizer '" + name + "' (expected auto, gradient, cem or exhaustive)");
}

const char* optimizer_name(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::Auto: return "auto";
        case OptimizerKind::Gradient: return "gradient";
        case OptimizerKind::Cem: return "cem";
        case OptimizerKind::Exhaustive: return "exhaustive";
    }
    return "unknown";
}

Vector choose_action(const UtilityFn& u, const Vector& xhat, const ActionSpace& space, const OptimizerSpec& opt,
                     std::uint64_t stream) {
    switch (opt.kind) {
        case OptimizerKind::Auto:
            if (space.kind == ActionSpace::Kind::Discrete) return optimize_action_exhaustive(u, xhat, space).action;
            check_compatible(u, space);
            return space.clamp(u.target(xhat));
        case OptimizerKind::Gradient: return optimize_action_gradient(u, xhat, space, opt.gradient).action;
        case OptimizerKind::Cem: {
            CemOptions c = opt.cem;
            c.seed = derive_seed(opt.cem.seed, stream);
            return optimize_action_cem(u, xhat, space, c).action;
        }
        case OptimizerKind::Exhaustive: return optimize_action_exhaustive(u, xhat, space).action;
    }
    fail(ErrorCode::Config, "unknown optimizer");
}

Vector realized_utilities(const std::vector<Matrix>& forecasts, const EvaluationPlan& plan, const Trajectory& eval,
                          const UtilityFn& u, const ActionSpace& space, const OptimizerSpec& opt) {
    const int K = plan.horizon;
    require(forecasts.size() == plan.anchors.size(), ErrorCode::Shape, "one forecast per evaluation window required");
    require(plan.anchors.size() >= kMinEvalWindows, ErrorCode::Config, "fewer than 10 evaluation windows");
    Vector total = Vector::Zero(K);
    for (std::size_t w = 0; w < forecasts.size(); ++w) {
        for (int k = 0; k < K; ++k) {
            const Vector xhat = forecasts[w].row(k).transpose();
            if (!xhat.allFinite()) {
                total[k] = kNegInf;
                continue;
            }
            const auto stream = static_cast<std::uint64_t>(w) * static_cast<std::uint64_t>(K) + static_cast<std::uint64_t>(k);
            const Vector a = choose_action(u, xhat, space, opt, stream);
            const Vector truth = eval.data.row(static_cast<Eigen::Index>(plan.anchors[w]) + k).transpose();
            total[k] += u(truth, a);
        }
    }
    return total / static_cast<double>(forecasts.size());
}

Matrix utility_matrix(const ForecastBank& bank, const Trajectory& eval, const UtilityFn& u, const ActionSpace& space,
                      const OptimizerSpec& opt, int threads) {
    u.validate(static_cast<int>(eval.dim()));
    check_compatible(u, space);
    Matrix out = Matrix::Constant(static_cast<Eigen::Index>(bank.models()), bank.plan.horizon, kNegInf);
    parallel_for(bank.models(), threads, [&](std::size_t h) {
        if (!bank.usable(h)) return;
        out.row(static_cast<Eigen::Index>(h)) = realized_utilities(bank.forecasts[h], bank.plan, eval, u, space, opt).transpose();
    });
    return out;
}

double realized_utility(const ReservoirModel& model, const Trajectory& eval, int k, const UtilityFn& u,
                        const ActionSpace& space, std::size_t warmup, const OptimizerSpec& opt) {
    u.validate(static_cast<int>(eval.dim()));
    const EvaluationPlan plan = plan_windows(eval.steps(), k, warmup);
    std::vector<Matrix> forecasts;
    for (std::size_t t : plan.anchors)
        forecasts.push_back(rollout_partial(
            model, eval.data.middleRows(static_cast<Eigen::Index>(t - warmup), static_cast<Eigen::Index>(warmup)), k));
    return realized_utilities(forecasts, plan, eval, u, space, opt)[k - 1];
}

void DecisionConfig::validate(int K) const {
    require(p_k.size() == K, ErrorCode::Config, "p_k must have one entry per horizon");
    require((p_k.array() >= 0).all() && std::abs(p_k.sum() - 1.0) < 1e-9, ErrorCode::Config,
            "p_k must be non-negative and sum to 1");
    require(std::isfinite(lambda_max), ErrorCode::Config, "lambda_max must be finite");
    require(dt > 0, ErrorCode::Config, "dt must be > 0");
}

Vector DecisionConfig::aggregation_weights() const {
    Vector w(p_k.size());
    for (Eigen::Index k = 0; k < p_k.size(); ++k) w[k] = p_k[k] * std::exp(-lambda_max * static_cast<double>(k + 1) * dt);
    return w;
}

int DecisionConfig::modal_horizon() const {
    Eigen::Index arg = 0;
    for (Eigen::Index k = 1; k < p_k.size(); ++k)
        if (p_k[k] > p_k[arg]) arg = k;
    return static_cast<int>(arg + 1);
}

double DecisionConfig::k_eff() const {
    if (lambda_max == 0) {
        double s = 0;
        for (Eigen::Index k = 0; k < p_k.size(); ++k) s += static_cast<double>(k + 1) * p_k[k];
        return s;
    }
    return -std::log(aggregation_weights().sum()) / (lambda_max * dt);
}

double aggregate_utility(const Vector& u_row, const DecisionConfig& cfg) {
    const Vector w = cfg.aggregation_weights();
    require(u_row.size() == w.size(), ErrorCode::Shape, "utility row length must equal K");
    double total = 0;
    for (Eigen::Index k = 0; k < w.size(); ++k)
        if (cfg.p_k[k] > 0) total += w[k] * u_row[k];
    return total;
}

SelectionContext make_selection_context(const ForecastBank& val_bank, const Trajectory& val,
                                        const ForecastBank& test_bank, const Trajectory& test,
                                        const HorizonLossTable& val_losses, const UtilityFn& u,
                                        const ActionSpace& space, const OptimizerSpec& opt, int threads) {
    require(val_bank.models() == test_bank.models() && val_bank.models() == val_losses.pool_size(), ErrorCode::Shape,
            "validation and test banks cover different pools");
    SelectionContext ctx;
    ctx.val_bank = &val_bank;
    ctx.val = &val;
    ctx.test_bank = &test_bank;
    ctx.test = &test;
    ctx.val_losses = &val_losses;
    ctx.utility = u;
    ctx.space = space;
    ctx.optimizer = opt;
    ctx.u_val = utility_matrix(val_bank, val, u, space, opt, threads);
    ctx.u_test = utility_matrix(test_bank, test, u, space, opt, threads);
    return ctx;
}

std::vector<std::size_t> candidate_pool(const RashomonSets& sets, const DecisionConfig& cfg, bool* fallback) {
    require(!sets.members.empty(), ErrorCode::Domain, "no Rashomon sets");
    std::vector<std::size_t> common = sets.members.front();
    for (std::size_t k = 1; k < sets.members.size() && !common.empty(); ++k) {
        std::vector<std::size_t> next;
        std::set_intersection(common.begin(), common.end(), sets.members[k].begin(), sets.members[k].end(),
                              std::back_inserter(next));
        common = std::move(next);
    }
    if (fallback) *fallback = common.empty();
    if (!common.empty()) return common;
    const auto& modal = sets.members[static_cast<std::size_t>(cfg.modal_horizon() - 1)];
    require(!modal.empty(), ErrorCode::Domain, "the modal horizon's Rashomon set is empty");
    return modal;
}

std::vector<std::size_t> sample_without_replacement(const std::vector<std::size_t>& from, std::size_t n,
                                                    std::uint64_t seed) {
    std::vector<std::size_t> pool = from;
    const std::size_t take = std::min(n, pool.size());
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < take; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(take);
    std::sort(pool.begin(), pool.end());
    return pool;
}

namespace {

// Index into `ids` of the largest aggregated utility; lowest index on ties.
std::size_t argmax_aggregate(const Matrix& u, const std::vector<std::size_t>& ids, const DecisionConfig& cfg,
                             double* value) {
    std::size_t best = 0;
    double best_val = kNegInf;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const double v = aggregate_utility(u.row(static_cast<Eigen::Index>(ids[i])).transpose(), cfg);
        if (i == 0 || v > best_val) {
            best = i;
            best_val = v;
        }
    }
    if (value) *value = best_val;
    return best;
}

}  // namespace

SelectionResult select_model(const SelectionContext& ctx, const RashomonSets& sets, const DecisionConfig& cfg,
                             std::size_t sample_size, std::uint64_t seed, std::size_t random_repeats) {
    const int K = ctx.val_bank->plan.horizon;
    cfg.validate(K);
    require(sample_size >= 1, ErrorCode::Config, "sample size must be >= 1");
    require(random_repeats >= 2, ErrorCode::Config, "random baseline needs at least 2 draws");

    SelectionResult res;
    res.candidates = candidate_pool(sets, cfg, &res.fallback);
    res.sample = sample_without_replacement(res.candidates, sample_size, derive_seed(seed, 0x5a));
    res.u_k.resize(static_cast<Eigen::Index>(res.sample.size()), K);
    res.aggregate.resize(static_cast<Eigen::Index>(res.sample.size()));
    for (std::size_t i = 0; i < res.sample.size(); ++i) {
        res.u_k.row(static_cast<Eigen::Index>(i)) = ctx.u_val.row(static_cast<Eigen::Index>(res.sample[i]));
        res.aggregate[static_cast<Eigen::Index>(i)] = aggregate_utility(res.u_k.row(static_cast<Eigen::Index>(i)).transpose(), cfg);
    }
    res.chosen = res.sample[argmax_aggregate(ctx.u_val, res.sample, cfg, nullptr)];

    const auto test_score = [&](std::size_t h) {
        return aggregate_utility(ctx.u_test.row(static_cast<Eigen::Index>(h)).transpose(), cfg);
    };
    res.chosen_test = test_score(res.chosen);

    // Single best: lowest validation error at the modal horizon over the whole pool.
    const int modal = cfg.modal_horizon();
    double best_loss = std::numeric_limits<double>::infinity();
    for (Eigen::Index h = 0; h < ctx.val_losses->losses.rows(); ++h)
        if (ctx.val_losses->losses(h, modal - 1) < best_loss) {
            best_loss = ctx.val_losses->losses(h, modal - 1);
            res.single_best = static_cast<std::size_t>(h);
        }
    res.single_best_test = test_score(res.single_best);
    res.gain_over_single_best = res.chosen_test - res.single_best_test;

    // Ensemble: average the candidates' forecasts, then decide.
    std::vector<Matrix> mean_forecasts;
    for (std::size_t w = 0; w < ctx.test_bank->windows(); ++w) {
        Matrix acc = Matrix::Zero(K, static_cast<Eigen::Index>(ctx.test->dim()));
        for (std::size_t h : res.candidates) acc += ctx.test_bank->forecasts[h][w];
        mean_forecasts.push_back(acc / static_cast<double>(res.candidates.size()));
    }
    res.ensemble_u_k =
        realized_utilities(mean_forecasts, ctx.test_bank->plan, *ctx.test, ctx.utility, ctx.space, ctx.optimizer);
    res.ensemble_test = aggregate_utility(res.ensemble_u_k, cfg);

    // Random: a uniformly drawn candidate, repeated with independent seeds.
    for (std::size_t r = 0; r < random_repeats; ++r) {
        std::mt19937_64 rng(derive_seed(seed, 0x7a000 + r));
        std::uniform_int_distribution<std::size_t> pick(0, res.candidates.size() - 1);
        res.random_draws.push_back(test_score(res.candidates[pick(rng)]));
    }
    const double n = static_cast<double>(random_repeats);
    res.random_mean = std::accumulate(res.random_draws.begin(), res.random_draws.end(), 0.0) / n;
    double var = 0;
    for (double v : res.random_draws) var += (v - res.random_mean) * (v - res.random_mean);
    res.random_std = std::sqrt(var / (n - 1));
    const double se = res.random_std / std::sqrt(n);
    const double diff = res.chosen_test - res.random_mean;
    res.random_t = se > 0 ? diff / se
                          : (diff > 0 ? std::numeric_limits<double>::infinity()
                                      : (diff < 0 ? -std::numeric_limits<double>::infinity() : 0.0));

    // Oracle: best realized test utility anywhere in the pool (an upper bound).
    res.oracle_test = kNegInf;
    for (std::size_t h = 0; h < ctx.test_bank->models(); ++h) {
        if (!ctx.test_bank->usable(h)) continue;
        const double v = test_score(h);
        if (v > res.oracle_test) {
            res.oracle_test = v;
            res.oracle = h;
        }
    }
    return res;
}

std::vector<SweepPoint> sample_complexity_sweep(const SelectionContext& ctx, const RashomonSets& sets,
                                                const DecisionConfig& cfg, const std::vector<std::size_t>& sizes,
                                                std::size_t repeats, std::uint64_t seed) {
    cfg.validate(ctx.val_bank->plan.horizon);
    require(!sizes.empty() && std::is_sorted(sizes.begin(), sizes.end()), ErrorCode::Config,
            "sweep sizes must be non-empty and ascending");
    require(sizes.front() >= 1 && repeats >= 1, ErrorCode::Config, "sweep sizes and repeats must be >= 1");
    bool fallback = false;
    const auto candidates = candidate_pool(sets, cfg, &fallback);
    double best = 0;
    argmax_aggregate(ctx.u_val, candidates, cfg, &best);

    std::vector<SweepPoint> out;
    for (std::size_t s : sizes) {
        SweepPoint p;
        p.size = s;
        for (std::size_t r = 0; r < repeats; ++r) {
            const auto sample = sample_without_replacement(candidates, s, derive_seed(seed, (s << 20) + r));
            double got = 0;
            argmax_aggregate(ctx.u_val, sample, cfg, &got);
            p.gaps.push_back(best - got);
        }
        const double n = static_cast<double>(repeats);
        p.mean_gap = std::accumulate(p.gaps.begin(), p.gaps.end(), 0.0) / n;
        double var = 0;
        for (double g : p.gaps) var += (g - p.mean_gap) * (g - p.mean_gap);
        p.std_error = repeats > 1 ? std::sqrt(var / (n - 1) / n) : 0.0;
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace hcr
