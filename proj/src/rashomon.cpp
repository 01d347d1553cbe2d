#include "hcr/rashomon.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hcr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_bank(const ForecastBank& bank, const Trajectory& eval) {
    require(!bank.plan.anchors.empty(), ErrorCode::Config, "forecast bank has no windows");
    const std::size_t last = bank.plan.anchors.back() + static_cast<std::size_t>(bank.plan.horizon);
    require(last <= eval.steps(), ErrorCode::Shape, "forecast bank does not match the evaluation segment");
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double saa = 0, sbb = 0, sab = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
        sab += (a[i] - ma) * (b[i] - mb);
    }
    if (saa == 0 && sbb == 0) return 1.0;
    if (saa == 0 || sbb == 0) return 0.0;
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

}  // namespace

EvaluationPlan plan_windows(std::size_t eval_rows, int horizon, std::size_t warmup) {
    require(horizon >= 1, ErrorCode::Config, "horizon count K must be >= 1");
    require(warmup >= kMinWarmup, ErrorCode::Config, "warmup must be >= " + std::to_string(kMinWarmup));
    EvaluationPlan plan;
    plan.horizon = horizon;
    plan.warmup = warmup;
    const auto K = static_cast<std::size_t>(horizon);
    for (std::size_t t = warmup; t + K <= eval_rows; t += K) plan.anchors.push_back(t);
    require(plan.anchors.size() >= kMinEvalWindows, ErrorCode::Config,
            "evaluation segment of " + std::to_string(eval_rows) + " rows gives " +
                std::to_string(plan.anchors.size()) + " windows at K=" + std::to_string(horizon) + " and warmup " +
                std::to_string(warmup) + "; at least " + std::to_string(kMinEvalWindows) + " are required");
    return plan;
}

Matrix ForecastBank::truth_at(const Trajectory& eval, std::size_t w) const {
    return eval.data.middleRows(static_cast<Eigen::Index>(plan.anchors[w]), plan.horizon);
}

ForecastBank forecast_bank(const ModelPool& pool, const Trajectory& eval, int horizon, std::size_t warmup,
                           int threads) {
    ForecastBank bank;
    bank.plan = plan_windows(eval.steps(), horizon, warmup);
    bank.forecasts.resize(pool.size());
    parallel_for(pool.size(), threads, [&](std::size_t h) {
        const PoolEntry& e = pool.entries[h];
        if (!e.ok) return;
        require(e.model.input_dim == static_cast<int>(eval.dim()), ErrorCode::Shape,
                "evaluation data dimension does not match the pool");
        auto& out = bank.forecasts[h];
        out.reserve(bank.plan.anchors.size());
        for (std::size_t t : bank.plan.anchors) {
            const Matrix warm = eval.data.middleRows(static_cast<Eigen::Index>(t - warmup),
                                                     static_cast<Eigen::Index>(warmup));
            out.push_back(rollout_partial(e.model, warm, horizon));
        }
    });
    return bank;
}

HorizonLossTable evaluate_losses(const ForecastBank& bank, const Trajectory& eval) {
    check_bank(bank, eval);
    const int K = bank.plan.horizon;
    HorizonLossTable table;
    table.n_eval = bank.windows();
    table.losses = Matrix::Constant(static_cast<Eigen::Index>(bank.models()), K, kInf);
    for (std::size_t h = 0; h < bank.models(); ++h) {
        if (!bank.usable(h)) continue;
        for (int k = 0; k < K; ++k) {
            double sum = 0;
            for (std::size_t w = 0; w < bank.windows(); ++w) {
                const auto t = static_cast<Eigen::Index>(bank.plan.anchors[w]) + k;
                sum += (eval.data.row(t) - bank.forecasts[h][w].row(k)).squaredNorm();
            }
            const double mean = sum / static_cast<double>(bank.windows());
            table.losses(static_cast<Eigen::Index>(h), k) = std::isfinite(mean) ? mean : kInf;
        }
    }
    return table;
}

HorizonLossTable evaluate_losses(const ModelPool& pool, const Trajectory& eval, int horizon, std::size_t warmup,
                                 int threads) {
    return evaluate_losses(forecast_bank(pool, eval, horizon, warmup, threads), eval);
}

EpsilonSchedule epsilon_schedule(const HorizonLossTable& table, double alpha, double beta, double gamma) {
    require(alpha > 0 && alpha < 1, ErrorCode::Config, "alpha must lie in (0, 1)");
    require(beta >= 0 && gamma >= 0, ErrorCode::Config, "beta and gamma must be >= 0");
    const int K = table.horizons();
    EpsilonSchedule s{alpha, beta, gamma, Vector(K), Vector(K)};
    for (int k = 0; k < K; ++k) {
        double lo = kInf, hi = -kInf;
        for (Eigen::Index h = 0; h < table.losses.rows(); ++h) {
            const double v = table.losses(h, k);
            if (!std::isfinite(v)) continue;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        require(std::isfinite(lo), ErrorCode::Degenerate,
                "every model diverged at horizon " + std::to_string(k + 1) + "; the loss column has no finite entry");
        s.delta[k] = hi - lo;
        s.eps[k] = alpha * s.delta[k] * (1.0 + beta * std::exp(gamma * (k + 1)));
    }
    return s;
}

std::vector<std::size_t> RashomonSets::sizes() const {
    std::vector<std::size_t> out;
    for (const auto& m : members) out.push_back(m.size());
    return out;
}

RashomonSets build_sets(const HorizonLossTable& table, const Vector& eps) {
    const int K = table.horizons();
    require(eps.size() == K, ErrorCode::Shape, "tolerance vector length does not match the loss table");
    RashomonSets sets;
    sets.pool_size = table.pool_size();
    sets.eps = eps;
    sets.l_star = Vector::Constant(K, kInf);
    sets.members.resize(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        require(!(eps[k] < 0), ErrorCode::Domain, "tolerances must be >= 0");
        for (Eigen::Index h = 0; h < table.losses.rows(); ++h)
            if (std::isfinite(table.losses(h, k))) sets.l_star[k] = std::min(sets.l_star[k], table.losses(h, k));
        for (Eigen::Index h = 0; h < table.losses.rows(); ++h) {
            const double v = table.losses(h, k);
            if (std::isfinite(v) && v <= sets.l_star[k] + eps[k]) sets.members[k].push_back(static_cast<std::size_t>(h));
        }
    }
    return sets;
}

RashomonSets build_sets(const HorizonLossTable& table, const EpsilonSchedule& schedule) {
    return build_sets(table, schedule.eps);
}

Calibration calibrate_schedule(const HorizonLossTable& table, std::size_t lo, std::size_t hi,
                               const CalibrationGrid& grid) {
    require(lo <= hi, ErrorCode::Config, "band lower bound exceeds upper bound");
    Calibration best;
    best.lo = lo;
    best.hi = hi;
    std::size_t best_count = std::numeric_limits<std::size_t>::max();
    for (double a : grid.alpha)
        for (double b : grid.beta)
            for (double g : grid.gamma) {
                EpsilonSchedule s = epsilon_schedule(table, a, b, g);
                const RashomonSets sets = build_sets(table, s);
                std::vector<int> outside;
                for (std::size_t k = 0; k < sets.members.size(); ++k) {
                    const std::size_t n = sets.members[k].size();
                    if (n < lo || n > hi) outside.push_back(static_cast<int>(k + 1));
                }
                if (outside.size() < best_count) {
                    best_count = outside.size();
                    best.schedule = std::move(s);
                    best.out_of_band = std::move(outside);
                }
            }
    return best;
}

ContractionFit fit_contraction(const std::vector<std::size_t>& sizes) {
    ContractionFit fit;
    std::vector<double> x, y;
    for (std::size_t k = 0; k < sizes.size(); ++k)
        if (sizes[k] >= 2) {
            fit.k_used.push_back(static_cast<int>(k + 1));
            x.push_back(static_cast<double>(k + 1));
            y.push_back(std::log(static_cast<double>(sizes[k])));
        }
    require(x.size() >= 4, ErrorCode::InsufficientData,
            "contraction fit needs at least 4 horizons with two or more members, found " + std::to_string(x.size()));
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    const double slope = sxy / sxx;
    fit.beta_lambda_hat = -slope;
    fit.intercept = my - slope * mx;
    fit.r2 = syy > 0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
    return fit;
}

ContractionFit fit_contraction(const RashomonSets& sets) { return fit_contraction(sets.sizes()); }

WeightedRatio lyapunov_weighted_ratio(const std::vector<std::size_t>& sizes, std::size_t pool_size, double lambda_max,
                                      double dt) {
    require(std::isfinite(lambda_max), ErrorCode::Domain, "lambda_max must be finite");
    require(pool_size > 0, ErrorCode::Domain, "pool size must be > 0");
    require(!sizes.empty(), ErrorCode::Domain, "no horizons");
    const auto K = static_cast<Eigen::Index>(sizes.size());
    // Shift exponents by their maximum before exponentiating (stable for large lambda).
    Vector logw(K);
    for (Eigen::Index k = 0; k < K; ++k) logw[k] = -lambda_max * static_cast<double>(k + 1) * dt;
    const double top = logw.maxCoeff();
    WeightedRatio out;
    out.weights = (logw.array() - top).exp().matrix();
    out.weights /= out.weights.sum();
    for (Eigen::Index k = 0; k < K; ++k) {
        const double ratio = static_cast<double>(sizes[static_cast<std::size_t>(k)]) / static_cast<double>(pool_size);
        out.rho_l += out.weights[k] * ratio;
        out.classical += ratio / static_cast<double>(K);
    }
    return out;
}

WeightedRatio lyapunov_weighted_ratio(const RashomonSets& sets, double lambda_max, double dt) {
    return lyapunov_weighted_ratio(sets.sizes(), sets.pool_size, lambda_max, dt);
}

MultiplicityReport ambiguity_and_agreement(const ForecastBank& bank, const RashomonSets& sets, const Trajectory& eval,
                                           const Vector& p_k, double lambda_max, double dt) {
    check_bank(bank, eval);
    const int K = bank.plan.horizon;
    require(static_cast<int>(sets.members.size()) == K, ErrorCode::Shape, "sets and forecast bank disagree on K");
    require(p_k.size() == K, ErrorCode::Shape, "p_k length must equal K");
    require((p_k.array() >= 0).all() && std::abs(p_k.sum() - 1.0) < 1e-9, ErrorCode::Config,
            "p_k must be non-negative and sum to 1");

    MultiplicityReport rep;
    const WeightedRatio ratio = lyapunov_weighted_ratio(sets, lambda_max, dt);
    rep.classical_ratio = ratio.classical;
    rep.rho_l = ratio.rho_l;
    rep.weights = ratio.weights;

    const Eigen::RowVectorXd mean = eval.data.colwise().mean();
    const double var = (eval.data.rowwise() - mean).array().square().sum() /
                       static_cast<double>(eval.data.rows() * eval.data.cols());
    const double scale = var > 0 ? std::sqrt(var) : 1.0;

    rep.ambiguity = Vector::Zero(K);
    rep.singleton.assign(static_cast<std::size_t>(K), false);
    for (int k = 0; k < K; ++k) {
        const auto& m = sets.members[static_cast<std::size_t>(k)];
        require(!m.empty(), ErrorCode::Domain, "empty Rashomon set at horizon " + std::to_string(k + 1));
        if (m.size() == 1) {
            rep.singleton[static_cast<std::size_t>(k)] = true;
            continue;
        }
        double sum = 0;
        std::size_t count = 0;
        for (std::size_t w = 0; w < bank.windows(); ++w)
            for (std::size_t a = 0; a < m.size(); ++a)
                for (std::size_t b = a + 1; b < m.size(); ++b) {
                    sum += (bank.forecasts[m[a]][w].row(k) - bank.forecasts[m[b]][w].row(k)).norm();
                    ++count;
                }
        rep.ambiguity[k] = sum / static_cast<double>(count) / scale;
    }
    rep.ambiguity_eff = p_k.dot(rep.ambiguity);

    // Pairs come from horizon-1 members whose forecasts stay finite on every window.
    std::vector<std::size_t> base;
    for (std::size_t h : sets.members.front()) {
        bool finite = bank.usable(h);
        for (std::size_t w = 0; finite && w < bank.windows(); ++w) finite = bank.forecasts[h][w].allFinite();
        if (finite) base.push_back(h);
    }
    rep.agreement_pairs = base.size() * (base.size() - (base.empty() ? 0 : 1)) / 2;
    std::vector<std::vector<double>> diffs(static_cast<std::size_t>(K));
    for (std::size_t a = 0; a < base.size(); ++a)
        for (std::size_t b = a + 1; b < base.size(); ++b)
            for (std::size_t w = 0; w < bank.windows(); ++w) {
                const Matrix delta = bank.forecasts[base[a]][w] - bank.forecasts[base[b]][w];
                for (int k = 0; k < K; ++k)
                    for (Eigen::Index c = 0; c < delta.cols(); ++c) diffs[static_cast<std::size_t>(k)].push_back(delta(k, c));
            }
    rep.agreement = Matrix::Identity(K, K);
    if (rep.agreement_pairs > 0)
        for (int i = 0; i < K; ++i)
            for (int j = i + 1; j < K; ++j) {
                const double r = pearson(diffs[static_cast<std::size_t>(i)], diffs[static_cast<std::size_t>(j)]);
                rep.agreement(i, j) = rep.agreement(j, i) = r;
            }
    else
        rep.agreement.setOnes();
    return rep;
}

}  // namespace hcr
