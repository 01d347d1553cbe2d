#include "hcr/reservoir.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <filesystem>
#include <random>

using namespace hcr;
namespace fs = std::filesystem;

namespace {

Trajectory l96(std::size_t steps, double F = 10.0, std::uint64_t seed = 1) {
    Trajectory t = simulate_lorenz96(5, F, SimulationOptions{0.05, 5, steps, 500, seed});
    return split_standardize(t, {0.6, 0.2, 0.2}).train;
}

ReservoirConfig small_config(int n_r, double leak = 1.0, std::uint64_t seed = 5) {
    ReservoirConfig c;
    c.n_r = n_r;
    c.rho = 0.8;
    c.sparsity = 0.5;
    c.leak = leak;
    c.seed = seed;
    c.washout = 20;
    return c;
}

}  // namespace

TEST_CASE("grid enumeration") {
    CHECK(enumerate_grid(GridAxes::full()).size() == 1080);
    CHECK(enumerate_grid(GridAxes{{100}, {0.9}, {0.5}, {1.0}}).size() == 1);
    const auto desk = enumerate_grid(GridAxes::desk());
    REQUIRE(desk.size() == 36);
    // Last axis fastest.
    CHECK(desk[0].n_r == 200);
    CHECK(desk[0].rho == 0.7);
    CHECK(desk[0].sparsity == 0.3);
    CHECK(desk[0].leak == 0.3);
    CHECK(desk[1].leak == 0.7);
    CHECK(desk[3].sparsity == 0.7);
    CHECK(desk[6].rho == 0.9);
    CHECK(desk[18].n_r == 400);
    CHECK(desk[35].leak == 1.0);
    CHECK_THROWS_AS(enumerate_grid(GridAxes{{}, {0.9}, {0.5}, {1.0}}), Error);
}

TEST_CASE("built reservoir has the configured spectral radius") {
    ReservoirConfig c = small_config(200);
    c.rho = 0.9;
    c.sparsity = 0.3;
    const ReservoirModel m = build_reservoir(c, 3);
    CHECK(std::abs(oracle::power_radius(m.w_res) - 0.9) / 0.9 < 1e-6);
}

TEST_CASE("full density and determinism") {
    ReservoirConfig c = small_config(30);
    c.sparsity = 1.0;
    const ReservoirModel a = build_reservoir(c, 2);
    CHECK(a.w_res.nonZeros() == 30 * 30);
    const ReservoirModel b = build_reservoir(c, 2);
    CHECK((Matrix(a.w_res).array() == Matrix(b.w_res).array()).all());
    CHECK((a.w_in.array() == b.w_in.array()).all());
    CHECK((a.bias.array() == b.bias.array()).all());
}

TEST_CASE("zero input, zero state, zero bias gives zero states") {
    ReservoirModel m = build_reservoir(small_config(20, 0.6), 2);
    m.bias.setZero();
    const Matrix states = run_reservoir(m, Matrix::Zero(15, 2), Vector::Zero(20));
    CHECK(states.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("leak one equals a direct tanh recurrence") {
    const ReservoirModel m = build_reservoir(small_config(25, 1.0), 3);
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g;
    Matrix inputs(12, 3);
    for (int i = 0; i < 12; ++i)
        for (int j = 0; j < 3; ++j) inputs(i, j) = g(rng);
    const Matrix states = run_reservoir(m, inputs, Vector::Zero(25));
    const Matrix w = Matrix(m.w_res);
    Vector r = Vector::Zero(25);
    for (int t = 0; t < 12; ++t) {
        Vector pre = w * r + m.w_in * inputs.row(t).transpose() + m.bias;
        for (int i = 0; i < 25; ++i) r[i] = std::tanh(pre[i]);
        CHECK((states.row(t).transpose() - r).cwiseAbs().maxCoeff() < 1e-14);
        CHECK(states.row(t).cwiseAbs().maxCoeff() <= 1.0);
    }
}

TEST_CASE("leaky update blends old and new state") {
    const ReservoirModel m = build_reservoir(small_config(10, 0.3), 1);
    Vector r = Vector::Constant(10, 0.5);
    const Vector x = Vector::Constant(1, 0.7);
    Vector expect = 0.7 * r;
    const Vector pre = Matrix(m.w_res) * r + m.w_in * x + m.bias;
    for (int i = 0; i < 10; ++i) expect[i] += 0.3 * std::tanh(pre[i]);
    m.advance(r, x);
    CHECK((r - expect).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("ridge matches the dense normal equations on random instances") {
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<int> nr(1, 5), tt(2, 10);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 20; ++trial) {
        const int n = nr(rng), T = std::max(tt(rng), 2);
        Matrix s(T, n), y(T, 2);
        for (int i = 0; i < T; ++i) {
            for (int j = 0; j < n; ++j) s(i, j) = g(rng);
            for (int j = 0; j < 2; ++j) y(i, j) = g(rng);
        }
        const double lambda = std::pow(10.0, -4 + trial % 5);
        const Matrix w = solve_ridge(s, y, lambda);
        const Matrix ref = oracle::ridge(s, y, lambda);
        CHECK((w - ref).norm() / std::max(ref.norm(), 1e-300) < 1e-8);
    }
}

TEST_CASE("ridge limits") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-1, 1);
    Matrix s(30, 4), y(30, 2);
    for (int i = 0; i < 30; ++i) {
        for (int j = 0; j < 4; ++j) s(i, j) = u(rng);
        for (int j = 0; j < 2; ++j) y(i, j) = u(rng);
    }
    CHECK(solve_ridge(s, y, 1e12).norm() < 1e-6);
    // Stacking every row twice doubles both sides of the normal equations, so
    // the regularizer has to double with them for the solution to stay put.
    Matrix s2(60, 4), y2(60, 2);
    s2 << s, s;
    y2 << y, y;
    const Matrix w1 = solve_ridge(s, y, 1e-3);
    const Matrix w2 = solve_ridge(s2, y2, 2e-3);
    CHECK((w1 - w2).norm() / w1.norm() < 1e-10);
}

TEST_CASE("one-step rollout equals the readout after teacher forcing") {
    const Trajectory train = l96(3000);
    const ReservoirModel m = train_readout(build_reservoir(small_config(60), 5), train);
    const Matrix warm = train.data.topRows(50);
    const Matrix f = rollout(m, warm, 1);
    const Matrix states = run_reservoir(m, warm, Vector::Zero(60));
    const Vector direct = m.readout(states.row(49).transpose());
    CHECK((f.row(0).transpose() - direct).cwiseAbs().maxCoeff() == 0.0);
    CHECK((predict(m, warm, 1) - direct).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("two-step rollout composes the one-step map") {
    const Trajectory train = l96(3000);
    const ReservoirModel m = train_readout(build_reservoir(small_config(60), 5), train);
    const Matrix warm = train.data.topRows(40);
    const Matrix f = rollout(m, warm, 2);
    Matrix extended(41, 5);
    extended << warm, f.row(0);
    const Matrix states = run_reservoir(m, extended, Vector::Zero(60));
    const Vector second = m.readout(states.row(40).transpose());
    CHECK((f.row(1).transpose() - second).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("rollout preconditions and divergence") {
    const Trajectory train = l96(2000);
    ReservoirModel m = train_readout(build_reservoir(small_config(30), 5), train);
    CHECK_THROWS_AS(rollout(m, train.data.topRows(kMinWarmup - 1), 3), Error);
    // An infinite readout makes the very first closed-loop output non-finite.
    m.w_out = Matrix::Constant(30, 5, std::numeric_limits<double>::infinity());
    try {
        rollout(m, train.data.topRows(30), 10);
        FAIL("expected divergence");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::RolloutDiverged);
    }
    const Matrix partial = rollout_partial(m, train.data.topRows(30), 10);
    CHECK(partial.rows() == 10);
    CHECK(std::isnan(partial(0, 0)));
    CHECK(std::isnan(partial(9, 0)));
}

TEST_CASE("pool training is deterministic across thread counts") {
    const Trajectory train = l96(2500);
    std::vector<ReservoirConfig> configs;
    for (int n : {20, 40})
        for (double leak : {0.5, 1.0}) {
            ReservoirConfig c = small_config(n, leak);
            configs.push_back(c);
        }
    const ModelPool a = train_pool(configs, train, 17, 1);
    const ModelPool b = train_pool(configs, train, 17, 3);
    REQUIRE(a.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        REQUIRE(a.entries[i].ok);
        CHECK(a.entries[i].model.config.seed == derive_seed(17, i));
        CHECK((a.entries[i].model.w_out->array() == b.entries[i].model.w_out->array()).all());
        CHECK(a.entries[i].model.w_out->allFinite());
    }
    CHECK_THROWS_AS(train_pool({}, train, 1), Error);
}

TEST_CASE("pool save and load round trip") {
    const Trajectory train = l96(2000);
    const ModelPool pool = train_pool({small_config(15), small_config(25, 0.5)}, train, 3, 1, GridAxes{{15, 25}, {0.8}, {0.5}, {1.0}});
    const fs::path dir = fs::temp_directory_path() / "hcr_pool_roundtrip";
    fs::remove_all(dir);
    save_pool(pool, dir);
    const ModelPool back = load_pool(dir);
    REQUIRE(back.size() == 2);
    CHECK(back.master_seed == 3);
    for (std::size_t i = 0; i < 2; ++i) {
        const auto& x = pool.entries[i].model;
        const auto& y = back.entries[i].model;
        CHECK((Matrix(x.w_res).array() == Matrix(y.w_res).array()).all());
        CHECK((x.w_in.array() == y.w_in.array()).all());
        CHECK((x.w_out->array() == y.w_out->array()).all());
        CHECK(x.config.leak == y.config.leak);
    }
    CHECK_THROWS_AS(load_pool(dir / "nope"), Error);
}
