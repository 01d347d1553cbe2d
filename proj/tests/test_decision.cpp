#include "hcr/decision.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

using namespace hcr;

namespace {

ActionSpace box1(double lo, double hi) { return ActionSpace::box(Vector::Constant(1, lo), Vector::Constant(1, hi)); }

Vector v1(double x) { return Vector::Constant(1, x); }

// Dense grid maximizer of f over [lo, hi].
std::pair<double, double> grid_max(const std::function<double(double)>& f, double lo, double hi, int n) {
    double best_a = lo, best = f(lo);
    for (int i = 1; i <= n; ++i) {
        const double a = lo + (hi - lo) * i / n;
        const double v = f(a);
        if (v > best) {
            best = v;
            best_a = a;
        }
    }
    return {best_a, best};
}

ForecastBank constant_bank(const std::vector<double>& values, int K, std::size_t windows) {
    ForecastBank bank;
    bank.plan.horizon = K;
    bank.plan.warmup = kMinWarmup;
    for (std::size_t w = 0; w < windows; ++w) bank.plan.anchors.push_back(w * static_cast<std::size_t>(K));
    bank.forecasts.resize(values.size());
    for (std::size_t h = 0; h < values.size(); ++h) bank.forecasts[h].assign(windows, Matrix::Constant(K, 1, values[h]));
    return bank;
}

// Selection inputs whose utility matrices are set directly by the test.
struct Fixture {
    ForecastBank bank;
    Trajectory eval;
    HorizonLossTable losses;
    SelectionContext ctx;

    Fixture(const Matrix& u_val, const Matrix& u_test, const Vector& loss_at_1) {
        const auto H = static_cast<std::size_t>(u_val.rows());
        const int K = static_cast<int>(u_val.cols());
        std::vector<double> values(H);
        for (std::size_t h = 0; h < H; ++h) values[h] = 0.1 * static_cast<double>(h);
        bank = constant_bank(values, K, 10);
        eval.dt = 1;
        eval.data = Matrix::Zero(10 * K, 1);
        losses.losses = Matrix::Zero(static_cast<Eigen::Index>(H), K);
        losses.losses.col(0) = loss_at_1;
        losses.n_eval = 10;
        ctx = make_selection_context(bank, eval, bank, eval, losses, UtilityFn::quadratic(), box1(-5, 5), {});
        ctx.u_val = u_val;
        ctx.u_test = u_test;
    }
};

RashomonSets all_members(std::size_t H, int K) {
    RashomonSets s;
    s.pool_size = H;
    std::vector<std::size_t> ids(H);
    for (std::size_t i = 0; i < H; ++i) ids[i] = i;
    s.members.assign(static_cast<std::size_t>(K), ids);
    return s;
}

DecisionConfig uniform_config(int K, double lambda, double dt = 1.0) {
    DecisionConfig c;
    c.p_k = Vector::Constant(K, 1.0 / K);
    c.lambda_max = lambda;
    c.dt = dt;
    return c;
}

}  // namespace

TEST_CASE("gradient optimizer on quadratic tracking") {
    const UtilityFn u = UtilityFn::quadratic();
    CHECK(std::abs(optimize_action_gradient(u, v1(3.0), box1(-10, 10)).action[0] - 3.0) < 1e-4);
    CHECK(optimize_action_gradient(u, v1(20.0), box1(-10, 10)).action[0] == 10.0);
}

TEST_CASE("gradient optimizer on the smoothed asymmetric utility matches a grid") {
    const UtilityFn u = UtilityFn::asymmetric(2.0, 1.0);
    const Vector x = v1(0.3);
    const ActionResult r = optimize_action_gradient(u, x, box1(-1, 1));
    const auto [a_star, best] = grid_max([&](double a) { return u.smooth(x, v1(a)); }, -1, 1, 10000);
    CHECK(r.action[0] < 0.3);
    CHECK(std::abs(r.action[0] - a_star) < 1e-3);
    CHECK(u.smooth(x, r.action) >= best - 1e-6);
}

TEST_CASE("gradient optimizer rejects table utilities") {
    try {
        optimize_action_gradient(UtilityFn::table({1, 2}), v1(0), ActionSpace::discrete({v1(0), v1(1)}));
        FAIL("expected unsupported");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Unsupported);
    }
}

TEST_CASE("cem on a discrete table") {
    const UtilityFn u = UtilityFn::table({1, 5, 3});
    const ActionSpace s = ActionSpace::discrete({v1(0), v1(1), v1(2)});
    CemOptions o;
    o.seed = 4;
    CHECK(optimize_action_cem(u, v1(0), s, o).action[0] == 1.0);
    CHECK(optimize_action_exhaustive(u, v1(0), s).action[0] == 1.0);

    const ActionResult one = optimize_action_cem(UtilityFn::table({2.5}), v1(0), ActionSpace::discrete({v1(0)}), o);
    CHECK(one.action[0] == 0.0);
    CHECK(one.iterations == 1);
    CHECK_THROWS_AS(ActionSpace::discrete({}), Error);
}

TEST_CASE("cem agrees with the gradient optimizer and a grid on continuous boxes") {
    CemOptions o;
    o.seed = 11;
    for (double x : {-3.7, 0.0, 2.2, 8.0}) {
        const UtilityFn q = UtilityFn::quadratic();
        const double g = optimize_action_gradient(q, v1(x), box1(-5, 5)).action[0];
        const double c = optimize_action_cem(q, v1(x), box1(-5, 5), o).action[0];
        CHECK(std::abs(g - c) < 1e-2);
        const UtilityFn a = UtilityFn::asymmetric(2.0, 1.0);
        const auto [a_star, best] = grid_max([&](double v) { return a(v1(x), v1(v)); }, -5, 5, 10000);
        const double ca = optimize_action_cem(a, v1(x), box1(-5, 5), o).action[0];
        CHECK(std::abs(ca - a_star) < 1e-2);
    }
}

TEST_CASE("cem finds optima next to and on the box boundary") {
    CemOptions o;
    for (std::uint64_t seed : {1u, 2u, 3u, 491u}) {
        o.seed = seed;
        CHECK(std::abs(optimize_action_cem(UtilityFn::quadratic(), v1(4.9), box1(-5, 5), o).action[0] - 4.9) < 1e-2);
        CHECK(std::abs(optimize_action_cem(UtilityFn::quadratic(), v1(-7.5), box1(-5, 5), o).action[0] + 5.0) < 1e-2);
    }
}

TEST_CASE("auto optimizer clamps the forecast for tracking utilities") {
    const OptimizerSpec spec;
    CHECK(choose_action(UtilityFn::quadratic(), v1(7), box1(-5, 5), spec)[0] == 5.0);
    CHECK(choose_action(UtilityFn::asymmetric(3, 1), v1(1.5), box1(-5, 5), spec)[0] == 1.5);
}

TEST_CASE("realized utility") {
    const int K = 3;
    const std::size_t W = 12;
    Trajectory eval;
    eval.dt = 1;
    eval.data.resize(static_cast<Eigen::Index>(W * K), 2);
    std::mt19937_64 rng(6);
    std::normal_distribution<double> g;
    for (Eigen::Index i = 0; i < eval.data.rows(); ++i) eval.data.row(i) << g(rng), g(rng);
    EvaluationPlan plan;
    plan.horizon = K;
    for (std::size_t w = 0; w < W; ++w) plan.anchors.push_back(w * K);
    std::vector<Matrix> perfect, zero;
    for (std::size_t w = 0; w < W; ++w) {
        perfect.push_back(eval.data.middleRows(static_cast<Eigen::Index>(w * K), K));
        zero.push_back(Matrix::Zero(K, 2));
    }
    const UtilityFn u = UtilityFn::quadratic();
    const ActionSpace s = box1(-100, 100);
    const Vector up = realized_utilities(perfect, plan, eval, u, s, {});
    CHECK(up.cwiseAbs().maxCoeff() == 0.0);
    const Vector uz = realized_utilities(zero, plan, eval, u, s, {});
    for (int k = 0; k < K; ++k) {
        double m = 0;
        for (std::size_t w = 0; w < W; ++w) m += std::pow(eval.data(static_cast<Eigen::Index>(w * K) + k, 0), 2);
        CHECK(uz[k] == doctest::Approx(-m / W).epsilon(1e-12));
    }
    const Vector again = realized_utilities(std::vector<Matrix>(zero), plan, eval, u, s, {});
    CHECK((again.array() == uz.array()).all());
}

TEST_CASE("aggregation weights and effective horizon") {
    DecisionConfig c = uniform_config(4, 0.0);
    const Vector row = (Vector(4) << 1, 2, 3, 6).finished();
    CHECK(std::abs(aggregate_utility(row, c) - 3.0) < 1e-12);
    CHECK(c.k_eff() == doctest::Approx(2.5));
    c.lambda_max = 0.7;
    c.dt = 0.05;
    double s = 0;
    for (int k = 1; k <= 4; ++k) s += 0.25 * std::exp(-0.7 * k * 0.05);
    CHECK(c.k_eff() == doctest::Approx(-std::log(s) / (0.7 * 0.05)).epsilon(1e-12));
    c.p_k << 0.1, 0.4, 0.4, 0.1;
    CHECK(c.modal_horizon() == 2);
}

TEST_CASE("selection arithmetic example") {
    Matrix u(2, 2);
    u << 1, 3, 2, 1;
    Fixture f(u, u, Vector::Zero(2));
    DecisionConfig c;
    c.p_k = (Vector(2) << 0.5, 0.5).finished();
    c.lambda_max = 0;
    c.dt = 1;
    const SelectionResult r = select_model(f.ctx, all_members(2, 2), c, 2, 1);
    CHECK(r.aggregate[0] == doctest::Approx(2.0));
    CHECK(r.aggregate[1] == doctest::Approx(1.5));
    CHECK(r.chosen == 0);

    // A huge exponent leaves only the first horizon in play.
    c.lambda_max = 50;
    CHECK(select_model(f.ctx, all_members(2, 2), c, 2, 1).chosen == 1);
}

TEST_CASE("selection is invariant to increasing affine maps and respects baselines") {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> g;
    const int H = 12, K = 4;
    Matrix u(H, K), t(H, K);
    for (int h = 0; h < H; ++h)
        for (int k = 0; k < K; ++k) {
            u(h, k) = g(rng);
            t(h, k) = u(h, k) + 0.3 * g(rng);
        }
    Vector loss(H);
    for (int h = 0; h < H; ++h) loss[h] = 1.0 + 0.1 * ((h * 7) % H);
    Fixture a(u, t, loss);
    Fixture b((3.0 * u.array() + 5.0).matrix(), t, loss);
    const DecisionConfig c = uniform_config(K, 0.4, 0.05);
    const SelectionResult ra = select_model(a.ctx, all_members(H, K), c, H, 2);
    const SelectionResult rb = select_model(b.ctx, all_members(H, K), c, H, 2);
    CHECK(ra.chosen == rb.chosen);
    CHECK(ra.oracle_test >= ra.chosen_test);
    CHECK(ra.oracle_test >= ra.single_best_test);
    CHECK(ra.single_best == 0);  // lowest loss at the modal horizon
    CHECK(ra.random_draws.size() == 50);

    double mean_best = -1e300;
    std::size_t arg = 0;
    for (int h = 0; h < H; ++h) {
        const double m = u.row(h).mean();
        if (m > mean_best) {
            mean_best = m;
            arg = static_cast<std::size_t>(h);
        }
    }
    const SelectionResult plain = select_model(a.ctx, all_members(H, K), uniform_config(K, 0.0), H, 2);
    CHECK(plain.chosen == arg);
}

TEST_CASE("single-model pool makes every baseline identical") {
    Matrix u(1, 3);
    u << -1, -2, -3;
    Fixture f(u, u, Vector::Zero(1));
    const SelectionResult r = select_model(f.ctx, all_members(1, 3), uniform_config(3, 0.2), 5, 3);
    CHECK(r.chosen == 0);
    CHECK(r.single_best == 0);
    CHECK(r.oracle == 0);
    CHECK(r.chosen_test == r.single_best_test);
    CHECK(r.chosen_test == r.oracle_test);
    CHECK(r.chosen_test == doctest::Approx(r.random_mean).epsilon(1e-14));
}

TEST_CASE("empty intersection falls back to the modal horizon's set") {
    RashomonSets s;
    s.pool_size = 4;
    s.members = {{0, 1}, {2, 3}, {2}};
    DecisionConfig c;
    c.p_k = (Vector(3) << 0.2, 0.5, 0.3).finished();
    bool fallback = false;
    CHECK(candidate_pool(s, c, &fallback) == std::vector<std::size_t>{2, 3});
    CHECK(fallback);
    s.members = {{0, 1, 2}, {1, 2}, {2}};
    CHECK(candidate_pool(s, c, &fallback) == std::vector<std::size_t>{2});
    CHECK_FALSE(fallback);
}

TEST_CASE("sample complexity sweep") {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> g;
    const int H = 16, K = 3;
    Matrix u(H, K);
    for (int h = 0; h < H; ++h)
        for (int k = 0; k < K; ++k) u(h, k) = g(rng);
    Fixture f(u, u, Vector::Zero(H));
    const DecisionConfig c = uniform_config(K, 0.3, 0.1);
    const auto pts = sample_complexity_sweep(f.ctx, all_members(H, K), c, {1, 2, 4, 8, 16}, 20, 9);
    REQUIRE(pts.size() == 5);
    CHECK(pts.back().mean_gap == 0.0);
    for (std::size_t i = 1; i < pts.size(); ++i)
        CHECK(pts[i].mean_gap <= pts[i - 1].mean_gap + pts[i - 1].std_error + pts[i].std_error);
    for (const auto& p : pts)
        for (double gap : p.gaps) CHECK(gap >= 0.0);

    RashomonSets single = all_members(H, K);
    single.members = {{5}, {5}, {5}};
    CHECK(sample_complexity_sweep(f.ctx, single, c, {1}, 5, 1)[0].mean_gap == 0.0);
    CHECK_THROWS_AS(sample_complexity_sweep(f.ctx, single, c, {4, 2}, 5, 1), Error);
}
