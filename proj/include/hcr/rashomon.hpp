#pragma once

#include "hcr/common.hpp"
#include "hcr/dynamics.hpp"
#include "hcr/reservoir.hpp"

#include <vector>

namespace hcr {

inline constexpr std::size_t kMinEvalWindows = 10;

/// Non-overlapping evaluation windows: window w forecasts rows
/// anchor_w .. anchor_w + K - 1 after teacher forcing on the `warmup` rows before it.
struct EvaluationPlan {
    std::vector<std::size_t> anchors;
    std::size_t warmup = 0;
    int horizon = 0;
};

/// Anchors at warmup, warmup + K, warmup + 2K, ... Needs at least 10 windows.
EvaluationPlan plan_windows(std::size_t eval_rows, int horizon, std::size_t warmup);

/// Every model's rollout on every window, computed once and shared by the
/// loss table, the diagnostics and the utilities.
struct ForecastBank {
    EvaluationPlan plan;
    /// forecasts[h][w] is K x d; rows from the first non-finite step onward are NaN.
    /// Empty for models that failed to train.
    std::vector<std::vector<Matrix>> forecasts;
    Matrix truth_at(const Trajectory& eval, std::size_t w) const;

    std::size_t models() const { return forecasts.size(); }
    std::size_t windows() const { return plan.anchors.size(); }
    bool usable(std::size_t h) const { return !forecasts[h].empty(); }
};

ForecastBank forecast_bank(const ModelPool& pool, const Trajectory& eval, int horizon, std::size_t warmup,
                           int threads = 1);

struct HorizonLossTable {
    Matrix losses;  // |H| x K, +inf where any window diverged or the model failed
    std::size_t n_eval = 0;

    int horizons() const { return static_cast<int>(losses.cols()); }
    std::size_t pool_size() const { return static_cast<std::size_t>(losses.rows()); }
};

/// Cell (h, k) is the mean over windows of |x_{t+k} - xhat_{t+k}|^2.
HorizonLossTable evaluate_losses(const ForecastBank& bank, const Trajectory& eval);
HorizonLossTable evaluate_losses(const ModelPool& pool, const Trajectory& eval, int horizon, std::size_t warmup,
                                 int threads = 1);

struct EpsilonSchedule {
    double alpha = 0.1;
    double beta = 0;
    double gamma = 0;
    Vector delta;  // finite column range per horizon
    Vector eps;
};

/// eps_k = alpha * Delta_k * (1 + beta * exp(gamma * k)), k = 1..K.
EpsilonSchedule epsilon_schedule(const HorizonLossTable& table, double alpha, double beta, double gamma);

struct RashomonSets {
    std::vector<std::vector<std::size_t>> members;  // members[k-1], ascending model index
    Vector eps;
    Vector l_star;
    std::size_t pool_size = 0;

    std::vector<std::size_t> sizes() const;
};

/// h is in set k iff L_k(h) is finite and L_k(h) <= L_k* + eps_k.
RashomonSets build_sets(const HorizonLossTable& table, const Vector& eps);
RashomonSets build_sets(const HorizonLossTable& table, const EpsilonSchedule& schedule);

struct CalibrationGrid {
    std::vector<double> alpha{0.02, 0.05, 0.1, 0.2, 0.4};
    std::vector<double> beta{0, 0.25, 0.5, 1, 2};
    std::vector<double> gamma{0, 0.05, 0.1, 0.2};
};

struct Calibration {
    EpsilonSchedule schedule;
    std::size_t lo = 0;
    std::size_t hi = 0;
    std::vector<int> out_of_band;  // horizons (1-based) left outside [lo, hi]
    bool feasible() const { return out_of_band.empty(); }
};

/// Grid search minimizing the number of horizons whose set size leaves [lo, hi];
/// ties go to smaller alpha, then beta, then gamma.
Calibration calibrate_schedule(const HorizonLossTable& table, std::size_t lo, std::size_t hi,
                               const CalibrationGrid& grid = {});

struct ContractionFit {
    double beta_lambda_hat = 0;  // negated slope of log |R_k| against k
    double intercept = 0;
    double r2 = 0;
    std::vector<int> k_used;
};

/// Least squares over horizons with at least two members; needs four of them.
ContractionFit fit_contraction(const std::vector<std::size_t>& sizes);
ContractionFit fit_contraction(const RashomonSets& sets);

struct WeightedRatio {
    double rho_l = 0;
    double classical = 0;
    Vector weights;
};

/// w_k = exp(-lambda k dt) / Z, rho_L = sum_k w_k |R_k| / |H|.
WeightedRatio lyapunov_weighted_ratio(const std::vector<std::size_t>& sizes, std::size_t pool_size,
                                      double lambda_max, double dt);
WeightedRatio lyapunov_weighted_ratio(const RashomonSets& sets, double lambda_max, double dt);

struct MultiplicityReport {
    double classical_ratio = 0;
    double rho_l = 0;
    Vector weights;
    Vector ambiguity;             // per horizon
    std::vector<bool> singleton;  // set k had a single member
    double ambiguity_eff = 0;
    Matrix agreement;             // K x K
    std::size_t agreement_pairs = 0;
};

/// Ambiguity_k: mean pairwise forecast distance among members of set k, divided
/// by the square root of the mean per-coordinate variance of `eval`.
/// Agreement(i, j): Pearson correlation of pairwise forecast differences at
/// horizons i and j, pooled over member pairs of the horizon-1 set, windows and
/// coordinates.
MultiplicityReport ambiguity_and_agreement(const ForecastBank& bank, const RashomonSets& sets, const Trajectory& eval,
                                           const Vector& p_k, double lambda_max, double dt);

}  // namespace hcr
