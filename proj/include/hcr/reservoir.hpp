#pragma once

#include "hcr/common.hpp"
#include "hcr/dynamics.hpp"

#include <Eigen/Sparse>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hcr {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// One point of the hyperparameter grid plus the fixed training constants.
struct ReservoirConfig {
    int n_r = 200;
    double rho = 0.9;
    double sparsity = 0.3;
    double leak = 1.0;
    double input_scale = 0.5;
    double bias_std = 0.1;
    double ridge_lambda = 1e-6;
    std::size_t washout = 500;
    std::uint64_t seed = 0;
    std::size_t window = 20;
};

void validate(const ReservoirConfig& cfg);

/// Value lists for the four searched axes, enumerated in the order
/// n_r, rho, sparsity, leak (last axis fastest).
struct GridAxes {
    std::vector<int> n_r;
    std::vector<double> rho;
    std::vector<double> sparsity;
    std::vector<double> leak;

    std::size_t size() const { return n_r.size() * rho.size() * sparsity.size() * leak.size(); }

    /// 6 x 6 x 5 x 6 = 1080 configurations.
    static GridAxes full();
    /// 2 x 3 x 2 x 3 = 36 configurations; the laptop-scale default.
    static GridAxes desk();
};

std::vector<ReservoirConfig> enumerate_grid(const GridAxes& axes, const ReservoirConfig& base = {});

struct ReservoirModel {
    ReservoirConfig config;
    SparseMatrix w_res;
    Matrix w_in;    // n_r x d
    Vector bias;    // n_r
    std::optional<Matrix> w_out;  // n_r x d once trained
    int input_dim = 0;

    bool trained() const { return w_out.has_value(); }

    /// r' = (1 - a) r + a tanh(W_res r + W_in x + b)
    void advance(Vector& r, const Eigen::Ref<const Vector>& x) const;

    /// W_out^T r
    Vector readout(const Vector& r) const;
};

/// Largest eigenvalue magnitude of a square matrix (dense eigendecomposition).
double spectral_radius(const SparseMatrix& m);

/// Draws W_res, W_in and b from the config's seed and rescales W_res to spectral
/// radius rho. Zero-radius draws are resampled on a derived sub-seed up to 8 times.
ReservoirModel build_reservoir(const ReservoirConfig& cfg, int input_dim);

/// One reservoir state per input row; row t is the state after consuming input t.
Matrix run_reservoir(const ReservoirModel& model, const Matrix& inputs, const Vector& r0);

/// Teacher-forced design matrices: states after inputs x_0..x_{T-2} (minus the
/// washout prefix) and their one-step-ahead targets x_1..x_{T-1}.
struct ReadoutProblem {
    Matrix states;
    Matrix targets;
};

ReadoutProblem collect_readout_problem(const ReservoirModel& model, const Trajectory& train);

/// Solves (R^T R + lambda I) W = R^T Y by Cholesky. On factorization failure the
/// diagonal gets an extra 10 lambda once before giving up.
Matrix solve_ridge(const Matrix& states, const Matrix& targets, double lambda);

ReservoirModel train_readout(const ReservoirModel& model, const Trajectory& train);

/// Shortest warmup accepted by predict/rollout.
inline constexpr std::size_t kMinWarmup = 20;

/// Drives the reservoir from the zero state through `warmup` (teacher forcing),
/// then runs closed-loop for `horizon` steps. Row k-1 is the forecast k steps
/// past the last warmup row. Non-finite output raises RolloutDiverged.
Matrix rollout(const ReservoirModel& model, const Matrix& warmup, int horizon);

/// Same as rollout, but a non-finite forecast does not throw: that row and every
/// later one are NaN.
Matrix rollout_partial(const ReservoirModel& model, const Matrix& warmup, int horizon);

/// The horizon-k forecast alone.
Vector predict(const ReservoirModel& model, const Matrix& warmup, int k);

struct PoolEntry {
    ReservoirModel model;
    bool ok = false;
    std::string error;
};

struct ModelPool {
    std::vector<PoolEntry> entries;
    std::uint64_t master_seed = 0;
    GridAxes axes;

    std::size_t size() const { return entries.size(); }
};

/// Builds and trains every config. Model i is seeded with derive_seed(master_seed, i),
/// so the pool is a pure function of (master_seed, configs) for any thread count.
/// Per-model failures are recorded; the call throws only when every model fails.
ModelPool train_pool(const std::vector<ReservoirConfig>& configs, const Trajectory& train,
                     std::uint64_t master_seed, int threads = 1, const GridAxes& axes = {});

/// Directory layout: manifest.json plus model_XXXX.bin per model.
void save_pool(const ModelPool& pool, const std::filesystem::path& dir);
ModelPool load_pool(const std::filesystem::path& dir);

}  // namespace hcr
