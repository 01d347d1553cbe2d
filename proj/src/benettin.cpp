#include "hcr/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace hcr {

namespace {

BenettinResult summarize(const std::vector<double>& logs, double window_time, std::size_t blocks) {
    BenettinResult out;
    out.windows = logs.size();
    require(!logs.empty(), ErrorCode::InsufficientData, "no renormalisation windows; increase steps");
    double total = 0;
    for (double v : logs) total += v;
    out.lambda_max = total / (static_cast<double>(logs.size()) * window_time);

    // Batch means: block rates are close to independent once blocks are long.
    const std::size_t b = std::min(blocks, logs.size());
    if (b < 2) return out;
    const std::size_t per = logs.size() / b;
    std::vector<double> rates(b, 0.0);
    for (std::size_t k = 0; k < b; ++k) {
        for (std::size_t i = k * per; i < (k + 1) * per; ++i) rates[k] += logs[i];
        rates[k] /= static_cast<double>(per) * window_time;
    }
    double mean = 0;
    for (double r : rates) mean += r;
    mean /= static_cast<double>(b);
    double var = 0;
    for (double r : rates) var += (r - mean) * (r - mean);
    var /= static_cast<double>(b - 1);
    out.std_error = std::sqrt(var / static_cast<double>(b));
    return out;
}

Vector random_direction(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(derive_seed(seed, 0xbe77));
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector u(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = normal(rng);
    return u / u.norm();
}

BenettinResult run_lorenz96(const Lorenz96Params& p, std::size_t steps, std::uint64_t seed, const BenettinOptions& o) {
    require(o.h > 0 && o.h <= 0.05, ErrorCode::Config, "Lorenz-96 step must lie in (0, 0.05]");
    Vector x;
    if (o.initial) {
        require(o.initial->size() == p.dim, ErrorCode::Shape, "initial state has wrong dimension");
        x = *o.initial;
    } else {
        std::mt19937_64 rng(derive_seed(seed, 0xbe76));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        x = Vector::Constant(p.dim, p.forcing);
        x[0] += 0.01 * (0.5 + unit(rng));
    }
    Vector work[4];
    for (std::size_t s = 0; s < o.transient; ++s) rk4_step_lorenz96(x, p.forcing, o.h, work);
    Vector y = x + o.delta0 * random_direction(static_cast<std::size_t>(p.dim), seed);

    std::vector<double> logs;
    logs.reserve(steps / static_cast<std::size_t>(o.renorm_every));
    for (std::size_t s = 1; s <= steps; ++s) {
        rk4_step_lorenz96(x, p.forcing, o.h, work);
        rk4_step_lorenz96(y, p.forcing, o.h, work);
        if (s % static_cast<std::size_t>(o.renorm_every) != 0) continue;
        require(x.allFinite() && y.allFinite(), ErrorCode::DivergedIntegration,
                "Lorenz-96 twin integration diverged at step " + std::to_string(s));
        const double dist = (y - x).norm();
        logs.push_back(std::log(dist / o.delta0));
        y = x + (y - x) * (o.delta0 / dist);
    }
    return summarize(logs, o.renorm_every * o.h, o.blocks);
}

BenettinResult run_ks(const KsParams& p, std::size_t steps, std::uint64_t seed, const BenettinOptions& o) {
    KsStepper stepper(p.grid_points, p.length, o.h);
    Vector u0;
    if (o.initial) {
        require(o.initial->size() == p.grid_points, ErrorCode::Shape, "initial state has wrong dimension");
        u0 = *o.initial;
    } else {
        std::mt19937_64 rng(derive_seed(seed, 0xbe75));
        std::normal_distribution<double> normal(0.0, 0.1);
        u0.resize(p.grid_points);
        for (Eigen::Index j = 0; j < u0.size(); ++j) u0[j] = normal(rng);
    }
    using Spectrum = KsStepper::Spectrum;
    Spectrum x = stepper.forward(u0);
    for (std::size_t s = 0; s < o.transient; ++s) stepper.advance(x);

    // Physical-space norm via Parseval: |u|^2 = sum |v_k|^2 / N.
    const double n = p.grid_points;
    const Spectrum dir = stepper.forward(random_direction(static_cast<std::size_t>(p.grid_points), seed));
    Spectrum y(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) y[k] = x[k] + o.delta0 * dir[k];

    std::vector<double> logs;
    for (std::size_t s = 1; s <= steps; ++s) {
        stepper.advance(x);
        stepper.advance(y);
        if (s % static_cast<std::size_t>(o.renorm_every) != 0) continue;
        double d2 = 0;
        for (std::size_t k = 0; k < x.size(); ++k) d2 += std::norm(y[k] - x[k]);
        const double dist = std::sqrt(d2 / n);
        require(std::isfinite(dist), ErrorCode::DivergedIntegration,
                "ks twin integration diverged at step " + std::to_string(s));
        logs.push_back(std::log(dist / o.delta0));
        for (std::size_t k = 0; k < x.size(); ++k) y[k] = x[k] + (y[k] - x[k]) * (o.delta0 / dist);
    }
    return summarize(logs, o.renorm_every * o.h, o.blocks);
}

BenettinResult run_logistic(const LogisticParams& p, std::size_t steps, std::uint64_t seed, const BenettinOptions& o) {
    double x = o.initial ? (*o.initial)[0] : logistic_initial_condition(seed);
    const auto map = [&](double v) { return p.r * v * (1.0 - v); };
    for (std::size_t s = 0; s < o.transient; ++s) x = map(x);
    // Perturb towards the interior so the twin never leaves [0, 1].
    double y = x < 0.5 ? x + o.delta0 : x - o.delta0;

    std::vector<double> logs;
    for (std::size_t s = 1; s <= steps; ++s) {
        x = map(x);
        y = map(y);
        if (s % static_cast<std::size_t>(o.renorm_every) != 0) continue;
        const double dist = std::abs(y - x);
        require(std::isfinite(dist), ErrorCode::DivergedIntegration, "logistic twin diverged");
        logs.push_back(std::log(dist / o.delta0));
        y = std::clamp(x + (y - x) * (o.delta0 / dist), 0.0, 1.0);
    }
    return summarize(logs, static_cast<double>(o.renorm_every), o.blocks);
}

}  // namespace

BenettinResult benettin_oracle(const SystemSpec& spec, std::size_t steps, std::uint64_t seed,
                               const BenettinOptions& options) {
    require(!std::holds_alternative<ExternalSource>(spec), ErrorCode::Unsupported,
            "the Benettin oracle needs a synthetic system, not external data");
    validate_system(spec);
    require(options.renorm_every >= 1, ErrorCode::Config, "renorm_every must be >= 1");
    require(options.delta0 > 0, ErrorCode::Config, "delta0 must be > 0");
    if (const auto* l = std::get_if<Lorenz96Params>(&spec)) return run_lorenz96(*l, steps, seed, options);
    if (const auto* k = std::get_if<KsParams>(&spec)) return run_ks(*k, steps, seed, options);
    if (const auto* g = std::get_if<LogisticParams>(&spec)) return run_logistic(*g, steps, seed, options);
    fail(ErrorCode::Unsupported, "unknown system");
}

}  // namespace hcr
