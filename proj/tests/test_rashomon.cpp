#include "hcr/rashomon.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace hcr;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

HorizonLossTable table_of(const Matrix& m) {
    HorizonLossTable t;
    t.losses = m;
    t.n_eval = 10;
    return t;
}

HorizonLossTable random_table(std::mt19937_64& rng, int H, int K) {
    std::uniform_real_distribution<double> u(0.0, 5.0);
    Matrix m(H, K);
    for (int h = 0; h < H; ++h)
        for (int k = 0; k < K; ++k) m(h, k) = u(rng) * (1 + k);
    return table_of(m);
}

std::vector<std::size_t> rescan(const HorizonLossTable& t, const Vector& eps, int k) {
    double best = kInf;
    for (Eigen::Index h = 0; h < t.losses.rows(); ++h) best = std::min(best, t.losses(h, k));
    std::vector<std::size_t> out;
    for (Eigen::Index h = 0; h < t.losses.rows(); ++h)
        if (std::isfinite(t.losses(h, k)) && t.losses(h, k) <= best + eps[k]) out.push_back(static_cast<std::size_t>(h));
    return out;
}

bool subset(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

// A bank of constant forecasts: model h predicts values[h] on every coordinate.
ForecastBank constant_bank(const std::vector<double>& values, int K, std::size_t windows, int d) {
    ForecastBank bank;
    bank.plan.horizon = K;
    bank.plan.warmup = 0;
    for (std::size_t w = 0; w < windows; ++w) bank.plan.anchors.push_back(w * static_cast<std::size_t>(K));
    bank.forecasts.resize(values.size());
    for (std::size_t h = 0; h < values.size(); ++h)
        bank.forecasts[h].assign(windows, Matrix::Constant(K, d, values[h]));
    return bank;
}

}  // namespace

TEST_CASE("hand-computed loss table") {
    Trajectory eval;
    eval.dt = 1;
    eval.data.resize(4, 1);
    eval.data << 1, 2, 3, 4;
    ForecastBank bank;
    bank.plan.horizon = 2;
    bank.plan.anchors = {0, 2};
    bank.forecasts.resize(2);
    Matrix a(2, 1), b(2, 1), c(2, 1), e(2, 1);
    a << 1, 3;  // window 0: errors 0, 1
    b << 3, 3;  // window 1: errors 0, 1
    c << 0, 0;  // window 0: errors 1, 4
    e << 5, 6;  // window 1: errors 4, 4
    bank.forecasts[0] = {a, b};
    bank.forecasts[1] = {c, e};
    const HorizonLossTable t = evaluate_losses(bank, eval);
    CHECK(t.losses(0, 0) == 0.0);
    CHECK(t.losses(0, 1) == 1.0);
    CHECK(t.losses(1, 0) == 2.5);
    CHECK(t.losses(1, 1) == 4.0);

    bank.forecasts[1][1](1, 0) = std::nan("");
    CHECK(std::isinf(evaluate_losses(bank, eval).losses(1, 1)));
}

TEST_CASE("perfect predictor has zero loss and the zero predictor sees the variance") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g;
    Trajectory eval;
    eval.dt = 1;
    const int K = 3, d = 4;
    const std::size_t W = 4000;
    eval.data.resize(static_cast<Eigen::Index>(W * K), d);
    for (Eigen::Index i = 0; i < eval.data.rows(); ++i)
        for (int j = 0; j < d; ++j) eval.data(i, j) = g(rng);
    ForecastBank bank = constant_bank({0.0, 0.0}, K, W, d);
    for (std::size_t w = 0; w < W; ++w) bank.forecasts[0][w] = bank.truth_at(eval, w);
    const HorizonLossTable t = evaluate_losses(bank, eval);
    CHECK(t.losses.row(0).cwiseAbs().maxCoeff() == 0.0);
    // Climatological variance computed directly from the data.
    const Eigen::RowVectorXd mean = eval.data.colwise().mean();
    const double trace = (eval.data.rowwise() - mean).array().square().sum() / static_cast<double>(eval.data.rows());
    for (int k = 0; k < K; ++k) CHECK(t.losses(1, k) == doctest::Approx(trace).epsilon(0.05));
}

TEST_CASE("evaluation windows") {
    const EvaluationPlan p = plan_windows(1000, 20, 100);
    REQUIRE(p.anchors.size() == 45);
    CHECK(p.anchors[0] == 100);
    CHECK(p.anchors[1] == 120);
    CHECK_THROWS_AS(plan_windows(200, 20, 100), Error);
}

TEST_CASE("epsilon schedule formula") {
    Matrix m(3, 3);
    m << 0, 1, 2,
         1, 2, 4,
         3, 3, kInf;
    const HorizonLossTable t = table_of(m);
    const EpsilonSchedule s = epsilon_schedule(t, 0.1, 0.5, 0.1);
    CHECK(s.delta[0] == 3.0);
    CHECK(s.delta[2] == 2.0);  // infinite entry excluded from the range
    CHECK(s.eps[2] == doctest::Approx(0.1 * 2 * (1 + 0.5 * std::exp(0.3))).epsilon(1e-14));
    CHECK(s.eps[2] == doctest::Approx(0.33497).epsilon(1e-4));  // 0.2 * 1.67493
    const EpsilonSchedule flat = epsilon_schedule(t, 0.2, 0, 0.7);
    for (int k = 0; k < 3; ++k) CHECK(flat.eps[k] == doctest::Approx(0.2 * flat.delta[k]).epsilon(1e-15));
    const EpsilonSchedule constant = epsilon_schedule(t, 0.2, 1.5, 0);
    for (int k = 0; k < 3; ++k) CHECK(constant.eps[k] == doctest::Approx(0.2 * constant.delta[k] * 2.5).epsilon(1e-15));

    Matrix dead(2, 2);
    dead << 1, kInf, 2, kInf;
    try {
        epsilon_schedule(table_of(dead), 0.1, 0, 0);
        FAIL("expected a degenerate-column error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Degenerate);
        CHECK(std::string(e.what()).find("horizon 2") != std::string::npos);
    }
}

TEST_CASE("set membership examples") {
    Matrix m(3, 1);
    m << 1.0, 1.2, 2.0;
    const RashomonSets s = build_sets(table_of(m), Vector::Constant(1, 0.3));
    CHECK(s.members[0] == std::vector<std::size_t>{0, 1});
    CHECK(s.l_star[0] == 1.0);

    Matrix n(4, 1);
    n << 0.5, kInf, 0.5, 9.0;
    CHECK(build_sets(table_of(n), Vector::Constant(1, kInf)).members[0] == std::vector<std::size_t>{0, 2, 3});
    CHECK(build_sets(table_of(n), Vector::Zero(1)).members[0] == std::vector<std::size_t>{0, 2});
    // Boundary ties are members.
    Matrix tie(2, 1);
    tie << 1.0, 1.5;
    CHECK(build_sets(table_of(tie), Vector::Constant(1, 0.5)).members[0].size() == 2);
}

TEST_CASE("membership is exact and monotone in the tolerance") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        HorizonLossTable t = random_table(rng, 25, 6);
        if (trial % 3 == 0) t.losses(trial % 25, trial % 6) = kInf;
        const EpsilonSchedule s = epsilon_schedule(t, 0.02 + 0.5 * u(rng), 2 * u(rng), 0.2 * u(rng));
        const RashomonSets a = build_sets(t, s);
        Vector bigger = s.eps;
        for (int k = 0; k < bigger.size(); ++k) bigger[k] += u(rng) * s.delta[k];
        const RashomonSets b = build_sets(t, bigger);
        for (int k = 0; k < 6; ++k) {
            CHECK(a.members[k] == rescan(t, s.eps, k));
            CHECK(b.members[k] == rescan(t, bigger, k));
            CHECK(subset(a.members[k], b.members[k]));
            CHECK_FALSE(a.members[k].empty());
        }
    }
}

TEST_CASE("membership is affine invariant per column and nested in alpha") {
    std::mt19937_64 rng(8);
    const HorizonLossTable t = random_table(rng, 30, 4);
    HorizonLossTable shifted = t;
    shifted.losses.col(2).array() += 17.0;
    const RashomonSets a = build_sets(t, epsilon_schedule(t, 0.1, 0.5, 0.1));
    const RashomonSets b = build_sets(shifted, epsilon_schedule(shifted, 0.1, 0.5, 0.1));
    CHECK(a.members == b.members);
    std::vector<std::vector<std::size_t>> prev;
    for (double alpha : {0.02, 0.05, 0.1, 0.2, 0.4}) {
        const RashomonSets s = build_sets(t, epsilon_schedule(t, alpha, 0.25, 0.05));
        if (!prev.empty())
            for (int k = 0; k < 4; ++k) CHECK(subset(prev[k], s.members[k]));
        prev = s.members;
    }
}

TEST_CASE("calibration") {
    std::mt19937_64 rng(5);
    const HorizonLossTable t = random_table(rng, 36, 10);
    const Calibration trivial = calibrate_schedule(t, 1, 36);
    CHECK(trivial.feasible());
    CHECK(trivial.schedule.alpha == 0.02);
    CHECK(trivial.schedule.beta == 0.0);
    CHECK(trivial.schedule.gamma == 0.0);

    const Calibration infeasible = calibrate_schedule(t, 37, 1000);
    CHECK_FALSE(infeasible.feasible());
    CHECK(infeasible.out_of_band.size() == 10);

    // Brute-force search over the same grid with the documented tie-break.
    const Calibration c = calibrate_schedule(t, 5, 20);
    std::size_t best = 11;
    double ba = 0, bb = 0, bg = 0;
    for (double a : {0.02, 0.05, 0.1, 0.2, 0.4})
        for (double b : {0.0, 0.25, 0.5, 1.0, 2.0})
            for (double g : {0.0, 0.05, 0.1, 0.2}) {
                const auto sizes = build_sets(t, epsilon_schedule(t, a, b, g)).sizes();
                std::size_t out = 0;
                for (auto n : sizes) out += (n < 5 || n > 20) ? 1 : 0;
                if (out < best) {
                    best = out;
                    ba = a;
                    bb = b;
                    bg = g;
                }
            }
    CHECK(c.out_of_band.size() == best);
    CHECK(c.schedule.alpha == ba);
    CHECK(c.schedule.beta == bb);
    CHECK(c.schedule.gamma == bg);
    for (int k : c.out_of_band) {
        const auto n = build_sets(t, c.schedule).sizes()[static_cast<std::size_t>(k - 1)];
        CHECK((n < 5 || n > 20));
    }
}

TEST_CASE("contraction fit") {
    std::vector<std::size_t> sizes;
    for (int k = 1; k <= 8; ++k) sizes.push_back(static_cast<std::size_t>(std::lround(100 * std::exp(-0.5 * k))));
    const ContractionFit f = fit_contraction(sizes);
    CHECK(std::abs(f.beta_lambda_hat - 0.5) < 0.02);
    CHECK(f.r2 > 0.99);
    for (int k : f.k_used) CHECK(sizes[static_cast<std::size_t>(k - 1)] >= 2);

    const ContractionFit flat = fit_contraction(std::vector<std::size_t>(10, 7));
    CHECK(std::abs(flat.beta_lambda_hat) < 1e-9);

    try {
        fit_contraction(std::vector<std::size_t>{9, 5, 3, 1, 1, 1});
        FAIL("expected insufficient data");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InsufficientData);
    }
}

TEST_CASE("lyapunov weighted ratio") {
    const WeightedRatio r = lyapunov_weighted_ratio(std::vector<std::size_t>{8, 4}, 10, std::log(2.0), 1.0);
    CHECK(r.weights[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(r.weights[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(r.rho_l == doctest::Approx(0.6667).epsilon(1e-4));

    std::mt19937_64 rng(40);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    std::uniform_int_distribution<std::size_t> sz(1, 50);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<std::size_t> sizes(20);
        for (auto& s : sizes) s = sz(rng);
        const double lambda = u(rng);
        const WeightedRatio w = lyapunov_weighted_ratio(sizes, 50, lambda, 0.05);
        CHECK(std::abs(w.weights.sum() - 1.0) < 1e-12);
        CHECK(w.rho_l >= 0.0);
        CHECK(w.rho_l <= 1.0);
        const WeightedRatio zero = lyapunov_weighted_ratio(sizes, 50, 0.0, 0.05);
        double mean = 0;
        for (auto s : sizes) mean += static_cast<double>(s) / 50.0;
        CHECK(std::abs(zero.rho_l - mean / 20.0) < 1e-12);
        const WeightedRatio full = lyapunov_weighted_ratio(std::vector<std::size_t>(20, 50), 50, lambda, 0.05);
        CHECK(std::abs(full.rho_l - 1.0) < 1e-12);
    }
}

TEST_CASE("ambiguity and agreement") {
    const int K = 3, d = 1;
    const std::size_t W = 12;
    Trajectory eval;
    eval.dt = 1;
    eval.data.resize(static_cast<Eigen::Index>(W * K), d);
    for (Eigen::Index i = 0; i < eval.data.rows(); ++i) eval.data(i, 0) = (i % 2 == 0) ? 1.0 : -1.0;
    const Vector p = Vector::Constant(K, 1.0 / K);

    const ForecastBank same = constant_bank({0.3, 0.3, 0.3}, K, W, d);
    RashomonSets all;
    all.pool_size = 3;
    all.members.assign(K, {0, 1, 2});
    const MultiplicityReport r = ambiguity_and_agreement(same, all, eval, p, 0.5, 1.0);
    CHECK(r.ambiguity.cwiseAbs().maxCoeff() == 0.0);
    CHECK((r.agreement.array() == 1.0).all());

    // Constant forecasts c and -c sit 2|c| apart; eval has unit variance.
    const ForecastBank pm = constant_bank({0.4, -0.4}, K, W, d);
    RashomonSets two;
    two.pool_size = 2;
    two.members.assign(K, {0, 1});
    two.members[2] = {1};
    const MultiplicityReport q = ambiguity_and_agreement(pm, two, eval, p, 0.5, 1.0);
    CHECK(q.ambiguity[0] == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(q.ambiguity[2] == 0.0);
    CHECK(q.singleton[2]);
    CHECK_FALSE(q.singleton[0]);
    CHECK(q.ambiguity_eff == doctest::Approx((0.8 + 0.8) / 3).epsilon(1e-12));
    CHECK(q.agreement.isApprox(q.agreement.transpose()));
    CHECK((q.agreement.diagonal().array() == 1.0).all());
}
