#include "hcr/reservoir.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <random>

namespace hcr {

void validate(const ReservoirConfig& cfg) {
    require(cfg.n_r >= 1, ErrorCode::Config, "n_r must be >= 1");
    require(cfg.rho > 0, ErrorCode::Config, "rho must be > 0");
    require(cfg.sparsity > 0 && cfg.sparsity <= 1, ErrorCode::Config, "sparsity must lie in (0, 1]");
    require(cfg.leak > 0 && cfg.leak <= 1, ErrorCode::Config, "leak must lie in (0, 1]");
    require(cfg.ridge_lambda > 0, ErrorCode::Config, "ridge_lambda must be > 0");
    require(cfg.input_scale >= 0 && cfg.bias_std >= 0, ErrorCode::Config, "input_scale and bias_std must be >= 0");
}

GridAxes GridAxes::full() {
    return {{100, 200, 400, 600, 800, 1000},
            {0.5, 0.7, 0.9, 1.1, 1.3, 1.5},
            {0.1, 0.3, 0.5, 0.7, 0.9},
            {0.1, 0.3, 0.5, 0.7, 0.9, 1.0}};
}

GridAxes GridAxes::desk() {
    return {{200, 400}, {0.7, 0.9, 1.1}, {0.3, 0.7}, {0.3, 0.7, 1.0}};
}

std::vector<ReservoirConfig> enumerate_grid(const GridAxes& axes, const ReservoirConfig& base) {
    require(!axes.n_r.empty() && !axes.rho.empty() && !axes.sparsity.empty() && !axes.leak.empty(),
            ErrorCode::Config, "every grid axis needs at least one value");
    std::vector<ReservoirConfig> out;
    out.reserve(axes.size());
    for (int n : axes.n_r)
        for (double rho : axes.rho)
            for (double p : axes.sparsity)
                for (double a : axes.leak) {
                    ReservoirConfig c = base;
                    c.n_r = n;
                    c.rho = rho;
                    c.sparsity = p;
                    c.leak = a;
                    validate(c);
                    out.push_back(c);
                }
    return out;
}

void ReservoirModel::advance(Vector& r, const Eigen::Ref<const Vector>& x) const {
    Vector pre = w_res * r + w_in * x + bias;
    const double a = config.leak;
    r = (1.0 - a) * r + a * pre.array().tanh().matrix();
}

Vector ReservoirModel::readout(const Vector& r) const {
    require(trained(), ErrorCode::Domain, "model has no trained readout");
    return w_out->transpose() * r;
}

double spectral_radius(const SparseMatrix& m) {
    require(m.rows() == m.cols(), ErrorCode::Shape, "spectral radius needs a square matrix");
    Eigen::MatrixXd dense = Eigen::MatrixXd(m);
    Eigen::EigenSolver<Eigen::MatrixXd> solver(dense, false);
    require(solver.info() == Eigen::Success, ErrorCode::Numerical, "eigenvalue computation did not converge");
    return solver.eigenvalues().cwiseAbs().maxCoeff();
}

ReservoirModel build_reservoir(const ReservoirConfig& cfg, int input_dim) {
    validate(cfg);
    require(input_dim >= 1, ErrorCode::Config, "input_dim must be >= 1");

    constexpr int kMaxAttempts = 8;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(attempt)));
        std::bernoulli_distribution connect(cfg.sparsity);
        std::normal_distribution<double> normal(0.0, 1.0);

        std::vector<Eigen::Triplet<double>> entries;
        entries.reserve(static_cast<std::size_t>(cfg.sparsity * cfg.n_r * cfg.n_r) + 16);
        for (int i = 0; i < cfg.n_r; ++i)
            for (int j = 0; j < cfg.n_r; ++j)
                if (connect(rng)) entries.emplace_back(i, j, normal(rng));
        SparseMatrix raw(cfg.n_r, cfg.n_r);
        raw.setFromTriplets(entries.begin(), entries.end());

        const double radius = entries.empty() ? 0.0 : spectral_radius(raw);
        if (!(radius > 1e-12) || !std::isfinite(radius)) continue;

        ReservoirModel model;
        model.config = cfg;
        model.input_dim = input_dim;
        model.w_res = raw * (cfg.rho / radius);

        std::uniform_real_distribution<double> uniform(-cfg.input_scale, cfg.input_scale);
        model.w_in.resize(cfg.n_r, input_dim);
        for (int i = 0; i < cfg.n_r; ++i)
            for (int j = 0; j < input_dim; ++j) model.w_in(i, j) = uniform(rng);

        std::normal_distribution<double> bias_dist(0.0, cfg.bias_std > 0 ? cfg.bias_std : 1.0);
        model.bias.resize(cfg.n_r);
        for (int i = 0; i < cfg.n_r; ++i) model.bias[i] = cfg.bias_std > 0 ? bias_dist(rng) : 0.0;
        return model;
    }
    fail(ErrorCode::Numerical, "reservoir draw had zero spectral radius after 8 attempts");
}

Matrix run_reservoir(const ReservoirModel& model, const Matrix& inputs, const Vector& r0) {
    require(inputs.cols() == model.input_dim, ErrorCode::Shape,
            "input dimension " + std::to_string(inputs.cols()) + " does not match model input_dim " +
                std::to_string(model.input_dim));
    require(r0.size() == model.config.n_r, ErrorCode::Shape, "initial state has wrong size");
    require(r0.allFinite(), ErrorCode::Domain, "initial state must be finite");
    Matrix states(inputs.rows(), model.config.n_r);
    Vector r = r0;
    for (Eigen::Index t = 0; t < inputs.rows(); ++t) {
        model.advance(r, inputs.row(t).transpose());
        states.row(t) = r.transpose();
    }
    return states;
}

ReadoutProblem collect_readout_problem(const ReservoirModel& model, const Trajectory& train) {
    const std::size_t T = train.steps();
    const std::size_t washout = model.config.washout;
    require(T > washout + 2, ErrorCode::InsufficientData,
            "training segment of " + std::to_string(T) + " rows is too short for washout " + std::to_string(washout));
    const auto inputs = train.data.topRows(static_cast<Eigen::Index>(T - 1));
    Matrix states = run_reservoir(model, inputs, Vector::Zero(model.config.n_r));
    const auto kept = static_cast<Eigen::Index>(T - 1 - washout);
    ReadoutProblem out;
    out.states = states.bottomRows(kept);
    out.targets = train.data.bottomRows(kept);
    return out;
}

Matrix solve_ridge(const Matrix& states, const Matrix& targets, double lambda) {
    require(states.rows() == targets.rows(), ErrorCode::Shape, "states and targets differ in length");
    require(lambda > 0, ErrorCode::Config, "ridge lambda must be > 0");
    const Eigen::Index n = states.cols();
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(states.transpose());
    gram = gram.selfadjointView<Eigen::Lower>();
    Eigen::MatrixXd rhs = states.transpose() * targets;

    for (double extra : {0.0, 10.0 * lambda}) {
        Eigen::MatrixXd a = gram;
        a.diagonal().array() += lambda + extra;
        Eigen::LLT<Eigen::MatrixXd> llt(a);
        if (llt.info() != Eigen::Success) continue;
        Matrix w = llt.solve(rhs);
        if (w.allFinite()) return w;
    }
    fail(ErrorCode::Numerical, "ridge normal equations are not positive definite");
}

ReservoirModel train_readout(const ReservoirModel& model, const Trajectory& train) {
    require(train.dim() == static_cast<std::size_t>(model.input_dim), ErrorCode::Shape,
            "training data dimension does not match the model");
    ReadoutProblem problem = collect_readout_problem(model, train);
    ReservoirModel out = model;
    out.w_out = solve_ridge(problem.states, problem.targets, model.config.ridge_lambda);
    return out;
}

namespace {

void check_rollout_args(const ReservoirModel& model, const Matrix& warmup, int horizon) {
    require(horizon >= 1, ErrorCode::Domain, "forecast horizon must be >= 1");
    require(static_cast<std::size_t>(warmup.rows()) >= kMinWarmup, ErrorCode::Domain,
            "warmup needs at least " + std::to_string(kMinWarmup) + " rows");
    require(warmup.cols() == model.input_dim, ErrorCode::Shape, "warmup dimension does not match the model");
    require(model.trained(), ErrorCode::Domain, "model has no trained readout");
}

}  // namespace

Matrix rollout_partial(const ReservoirModel& model, const Matrix& warmup, int horizon) {
    check_rollout_args(model, warmup, horizon);
    Vector r = Vector::Zero(model.config.n_r);
    for (Eigen::Index t = 0; t < warmup.rows(); ++t) model.advance(r, warmup.row(t).transpose());

    Matrix out = Matrix::Constant(horizon, model.input_dim, std::numeric_limits<double>::quiet_NaN());
    Vector x = model.readout(r);
    for (int k = 0; k < horizon; ++k) {
        if (k > 0) {
            model.advance(r, x);
            x = model.readout(r);
        }
        if (!x.allFinite()) break;
        out.row(k) = x.transpose();
    }
    return out;
}

Matrix rollout(const ReservoirModel& model, const Matrix& warmup, int horizon) {
    Matrix out = rollout_partial(model, warmup, horizon);
    for (int k = 0; k < horizon; ++k)
        if (!out.row(k).allFinite())
            fail(ErrorCode::RolloutDiverged, "forecast became non-finite at horizon " + std::to_string(k + 1));
    return out;
}

Vector predict(const ReservoirModel& model, const Matrix& warmup, int k) {
    require(k >= 1, ErrorCode::Domain, "forecast horizon must be >= 1");
    return rollout(model, warmup, k).row(k - 1).transpose();
}

ModelPool train_pool(const std::vector<ReservoirConfig>& configs, const Trajectory& train,
                     std::uint64_t master_seed, int threads, const GridAxes& axes) {
    require(!configs.empty(), ErrorCode::Config, "model pool needs at least one config");
    ModelPool pool;
    pool.master_seed = master_seed;
    pool.axes = axes;
    pool.entries.resize(configs.size());
    parallel_for(configs.size(), threads, [&](std::size_t i) {
        ReservoirConfig cfg = configs[i];
        cfg.seed = derive_seed(master_seed, i);
        PoolEntry& entry = pool.entries[i];
        entry.model.config = cfg;
        try {
            entry.model = train_readout(build_reservoir(cfg, static_cast<int>(train.dim())), train);
            entry.ok = true;
        } catch (const Error& e) {
            entry.ok = false;
            entry.error = e.what();
        }
    });
    bool any = false;
    for (const auto& e : pool.entries) any = any || e.ok;
    require(any, ErrorCode::Numerical, "every model in the pool failed to train");
    return pool;
}

}  // namespace hcr
