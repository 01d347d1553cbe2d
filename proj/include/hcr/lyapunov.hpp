#pragma once

#include "hcr/common.hpp"
#include "hcr/dynamics.hpp"

#include <optional>
#include <vector>

namespace hcr {

struct EmbeddingParams {
    int m = 1;
    int tau = 1;
    int theiler = 10;  // 10 * tau unless overridden
};

struct NeighborPair {
    std::size_t reference = 0;
    std::size_t neighbor = 0;
    double distance = 0;
};

struct DivergenceCurve {
    std::vector<double> d;  // mean log separation at j = 0 .. j_max-1
    double dt = 1.0;
    std::vector<NeighborPair> pairs;  // the reference/neighbor pairs that entered the mean

    std::size_t j_max() const { return d.size(); }
};

struct LyapunovEstimate {
    double lambda_max = 0;
    std::size_t fit_start = 0;
    std::size_t fit_end = 0;  // exclusive
    double r2 = 0;
    bool low_confidence = false;
    bool tau_fallback = false;  // MI had no strict local minimum
    DivergenceCurve curve;
    EmbeddingParams params;
};

/// Mutual information between x_t and x_{t+tau} using equiprobable (rank) bins,
/// ceil(T^(1/3)) of them capped at 64.
double mutual_information(const std::vector<double>& series, int tau);

struct DelayChoice {
    int tau = 1;
    bool fallback = false;
    std::vector<double> information;  // I(tau) for tau = 0 .. tau_max
};

/// First strict local minimum of I(tau) in 1..tau_max, else the global minimizer.
DelayChoice mutual_information_delay(const std::vector<double>& series, int tau_max);

/// Fraction of false nearest neighbours when going from m to m+1 delay blocks.
/// Rows of `series` are (possibly vector) samples. Neighbours closer in time than
/// `theiler` are not eligible.
double false_neighbor_fraction(const Matrix& series, int tau, int m, int theiler);

/// Smallest m whose false fraction is below 1%, m_max if none.
int false_nearest_neighbors(const Matrix& series, int tau, int m_max, int theiler);

/// Point i is [x_i, x_{i+tau}, ..., x_{i+(m-1)tau}] flattened (m * d columns).
Matrix embed(const Matrix& series, int m, int tau);

inline constexpr std::size_t kDefaultReferences = 1000;
inline constexpr std::size_t kDefaultJMax = 100;

DivergenceCurve divergence_curve(const Matrix& points, double dt, int theiler,
                                 std::size_t m_refs = kDefaultReferences, std::size_t j_max = kDefaultJMax);

/// Longest window of at least 5 points with Pearson r >= 0.99 in which every
/// 5-point sub-window also reaches 0.99; earlier start wins ties. Only the part of
/// the curve before it first reaches 90% of its total rise is searched.
LyapunovEstimate fit_lyapunov(const DivergenceCurve& curve);

struct LyapunovOptions {
    std::optional<int> m;
    std::optional<int> tau;
    std::optional<int> theiler;
    std::optional<std::size_t> j_max;
    std::optional<std::size_t> refs;
    int tau_max = 50;
    int m_max = 10;
    /// Use the whole state vector (m = 1 unless overridden); otherwise delay-embed
    /// the first coordinate with m from false nearest neighbours.
    bool full_state = true;
};

LyapunovEstimate estimate_lyapunov(const Trajectory& traj, const LyapunovOptions& options = {});

struct BenettinOptions {
    double h = 0.01;            // integrator step (ignored for maps)
    int renorm_every = 10;      // steps between renormalisations
    double delta0 = 1e-8;
    std::size_t transient = 5000;
    std::size_t blocks = 20;    // batch-means blocks for the standard error
    std::optional<Vector> initial;
};

struct BenettinResult {
    double lambda_max = 0;
    double std_error = 0;
    std::size_t windows = 0;
};

/// Twin-trajectory estimate of the largest exponent. `steps` counts integrator
/// steps (iterates for the logistic map). External data are unsupported.
BenettinResult benettin_oracle(const SystemSpec& spec, std::size_t steps, std::uint64_t seed,
                               const BenettinOptions& options = {});

}  // namespace hcr
