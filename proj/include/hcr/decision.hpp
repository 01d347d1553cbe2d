#pragma once

#include "hcr/common.hpp"
#include "hcr/rashomon.hpp"

#include <string>
#include <vector>

namespace hcr {

struct ActionSpace {
    enum class Kind { Box, Discrete };
    Kind kind = Kind::Box;
    Vector lower, upper;          // box bounds
    std::vector<Vector> actions;  // discrete choices

    static ActionSpace box(Vector lower, Vector upper);
    static ActionSpace discrete(std::vector<Vector> actions);

    int dim() const;
    void validate() const;
    Vector clamp(const Vector& a) const;
};

/// u(x, a) for a state x (full vector) and an action a. Quadratic and asymmetric
/// utilities compare a against x restricted to `channels`; a table utility gives
/// discrete action i (encoded as a[0] = i) the payoff offset[i] + weight[i] . x_ch.
struct UtilityFn {
    enum class Kind { Quadratic, Asymmetric, Table };
    Kind kind = Kind::Quadratic;
    double scale = 1.0;
    double over_cost = 1.0;
    double under_cost = 1.0;
    double sharpness = 50.0;  // softplus surrogate for the asymmetric kink
    std::vector<int> channels{0};
    std::vector<double> table_offset;
    std::vector<Vector> table_weight;

    static UtilityFn quadratic(double scale = 1.0, std::vector<int> channels = {0});
    static UtilityFn asymmetric(double over_cost, double under_cost, std::vector<int> channels = {0});
    static UtilityFn table(std::vector<double> offset, std::vector<Vector> weight = {}, std::vector<int> channels = {0});

    void validate(int state_dim) const;
    Vector target(const Vector& x) const;  // x restricted to channels

    double operator()(const Vector& x, const Vector& a) const;
    /// Differentiable version (softplus for the asymmetric kink) and its gradient in a.
    double smooth(const Vector& x, const Vector& a) const;
    Vector gradient(const Vector& x, const Vector& a) const;
};

const char* utility_kind_name(UtilityFn::Kind k);

struct ActionResult {
    Vector action;
    double utility = 0;
    int iterations = 0;
};

struct GradientOptions {
    double step = 0.01;  // initial step as a fraction of each box side
    int iters = 2000;
    double final_step_ratio = 1e-5;  // geometric decay of the step over the run
};

/// Projected Adam ascent (0.9 / 0.999, eps 1e-8) on the smooth utility from the
/// box centre; returns the best iterate.
ActionResult optimize_action_gradient(const UtilityFn& u, const Vector& xhat, const ActionSpace& space,
                                      const GradientOptions& options = {});

struct CemOptions {
    int population = 100;
    double elite_frac = 0.1;
    int generations = 100;
    std::uint64_t seed = 0;
};

/// Cross-entropy method: Gaussian proposal on boxes, categorical on discrete sets,
/// refit to the elite fraction each generation until the proposal variance drops
/// below 1e-8. Returns the best sample seen under the exact utility.
ActionResult optimize_action_cem(const UtilityFn& u, const Vector& xhat, const ActionSpace& space,
                                 const CemOptions& options = {});

ActionResult optimize_action_exhaustive(const UtilityFn& u, const Vector& xhat, const ActionSpace& space);

/// Auto picks the exact maximizer where one exists: clamp(xhat) for quadratic and
/// asymmetric utilities on a box, exhaustive search on a discrete set.
enum class OptimizerKind { Auto, Gradient, Cem, Exhaustive };

struct OptimizerSpec {
    OptimizerKind kind = OptimizerKind::Auto;
    GradientOptions gradient;
    CemOptions cem;
};

OptimizerKind parse_optimizer(const std::string& name);
const char* optimizer_name(OptimizerKind k);

/// `stream` decorrelates CEM draws between calls (e.g. window and horizon).
Vector choose_action(const UtilityFn& u, const Vector& xhat, const ActionSpace& space, const OptimizerSpec& opt,
                     std::uint64_t stream = 0);

/// U_k for one forecast set: per window, act on the forecast and score against
/// the truth. forecasts[w] is K x d. Returns a K-vector of window means.
Vector realized_utilities(const std::vector<Matrix>& forecasts, const EvaluationPlan& plan, const Trajectory& eval,
                          const UtilityFn& u, const ActionSpace& space, const OptimizerSpec& opt);

/// |H| x K matrix of U_k(h); -inf for models without usable forecasts.
Matrix utility_matrix(const ForecastBank& bank, const Trajectory& eval, const UtilityFn& u, const ActionSpace& space,
                      const OptimizerSpec& opt, int threads = 1);

/// U_k(model) at horizon k with its own rollouts over the evaluation windows.
double realized_utility(const ReservoirModel& model, const Trajectory& eval, int k, const UtilityFn& u,
                        const ActionSpace& space, std::size_t warmup, const OptimizerSpec& opt = {});

struct DecisionConfig {
    Vector p_k;
    double lambda_max = 0;
    double dt = 1;

    void validate(int K) const;
    /// Weights p_k exp(-lambda k dt).
    Vector aggregation_weights() const;
    /// Modal horizon of p_k (1-based, smallest on ties).
    int modal_horizon() const;
    /// -log(sum_k p_k exp(-lambda k dt)) / (lambda dt), in steps; sum k p_k at lambda = 0.
    double k_eff() const;
};

/// Everything selection needs from one pipeline run. The utility matrices are
/// computed once on the validation and test segments.
struct SelectionContext {
    const ForecastBank* val_bank = nullptr;
    const Trajectory* val = nullptr;
    const ForecastBank* test_bank = nullptr;
    const Trajectory* test = nullptr;
    const HorizonLossTable* val_losses = nullptr;
    UtilityFn utility;
    ActionSpace space;
    OptimizerSpec optimizer;
    Matrix u_val;
    Matrix u_test;
};

SelectionContext make_selection_context(const ForecastBank& val_bank, const Trajectory& val,
                                        const ForecastBank& test_bank, const Trajectory& test,
                                        const HorizonLossTable& val_losses, const UtilityFn& u,
                                        const ActionSpace& space, const OptimizerSpec& opt, int threads = 1);

/// Members common to every horizon, or the modal horizon's set when that is empty.
std::vector<std::size_t> candidate_pool(const RashomonSets& sets, const DecisionConfig& cfg, bool* fallback);

/// Uniform sample without replacement, returned in ascending order.
std::vector<std::size_t> sample_without_replacement(const std::vector<std::size_t>& from, std::size_t n,
                                                    std::uint64_t seed);

struct SelectionResult {
    std::vector<std::size_t> candidates;  // the intersection (or fallback set)
    std::vector<std::size_t> sample;      // S
    Matrix u_k;                           // |S| x K validation utilities
    Vector aggregate;                     // |S| aggregated validation utilities
    std::size_t chosen = 0;
    bool fallback = false;

    double chosen_test = 0;
    double single_best_test = 0;
    std::size_t single_best = 0;
    double ensemble_test = 0;
    Vector ensemble_u_k;  // per-horizon test utilities of the ensemble
    double random_mean = 0;
    double random_std = 0;
    std::vector<double> random_draws;
    double random_t = 0;  // one-sample t statistic of chosen vs the random draws
    double oracle_test = 0;
    std::size_t oracle = 0;
    double gain_over_single_best = 0;
};

/// Aggregated utility sum_k p_k exp(-lambda k dt) U_k over horizons with p_k > 0.
double aggregate_utility(const Vector& u_row, const DecisionConfig& cfg);

SelectionResult select_model(const SelectionContext& ctx, const RashomonSets& sets, const DecisionConfig& cfg,
                             std::size_t sample_size, std::uint64_t seed, std::size_t random_repeats = 50);

struct SweepPoint {
    std::size_t size = 0;
    double mean_gap = 0;
    double std_error = 0;
    std::vector<double> gaps;
};

/// Gap between the best aggregated validation utility over the whole candidate
/// pool and that of the model chosen from a random sample of each size.
std::vector<SweepPoint> sample_complexity_sweep(const SelectionContext& ctx, const RashomonSets& sets,
                                                const DecisionConfig& cfg, const std::vector<std::size_t>& sizes,
                                                std::size_t repeats, std::uint64_t seed);

}  // namespace hcr
