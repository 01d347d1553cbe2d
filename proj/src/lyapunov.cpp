#include "hcr/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace hcr {

namespace {

void require_not_constant(const std::vector<double>& series) {
    require(!series.empty(), ErrorCode::InsufficientData, "empty series");
    const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
    require(std::isfinite(*lo) && std::isfinite(*hi), ErrorCode::Domain, "series contains non-finite values");
    require(*hi > *lo, ErrorCode::Degenerate, "series is constant");
}

// Rank-based bin index of every sample; equal values keep index order.
std::vector<int> equiprobable_bins(const std::vector<double>& series, int bins) {
    const std::size_t n = series.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return series[a] < series[b]; });
    std::vector<int> out(n);
    for (std::size_t rank = 0; rank < n; ++rank)
        out[order[rank]] = static_cast<int>(rank * static_cast<std::size_t>(bins) / n);
    return out;
}

int bin_count(std::size_t n) {
    return std::min(64, static_cast<int>(std::ceil(std::cbrt(static_cast<double>(n)))));
}

double information_from_bins(const std::vector<int>& bin, int bins, int tau) {
    const std::size_t n = bin.size() - static_cast<std::size_t>(tau);
    std::vector<double> joint(static_cast<std::size_t>(bins * bins), 0.0), pa(bins, 0.0), pb(bins, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        const int a = bin[t], b = bin[t + tau];
        joint[static_cast<std::size_t>(a * bins + b)] += 1;
        pa[a] += 1;
        pb[b] += 1;
    }
    const double inv = 1.0 / static_cast<double>(n);
    double info = 0;
    for (int a = 0; a < bins; ++a)
        for (int b = 0; b < bins; ++b) {
            const double p = joint[static_cast<std::size_t>(a * bins + b)] * inv;
            if (p > 0) info += p * std::log(p / (pa[a] * inv * pb[b] * inv));
        }
    return info;
}

std::vector<double> column(const Matrix& m, Eigen::Index c) {
    std::vector<double> out(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] = m(i, c);
    return out;
}

double squared_distance(const double* a, const double* b, Eigen::Index n) {
    double s = 0;
    for (Eigen::Index k = 0; k < n; ++k) {
        const double diff = a[k] - b[k];
        s += diff * diff;
    }
    return s;
}

// Evenly spaced indices in [0, n), at most `count` of them.
std::vector<std::size_t> spread_indices(std::size_t n, std::size_t count) {
    const std::size_t m = std::min(n, count);
    std::vector<std::size_t> out(m);
    for (std::size_t k = 0; k < m; ++k) out[k] = k * n / m;
    return out;
}

// Nearest admissible neighbour of row i among rows [0, n): temporal separation
// above `theiler` and squared distance above `floor2`.
std::optional<std::pair<std::size_t, double>> nearest(const Matrix& pts, std::size_t i, std::size_t n, int theiler,
                                                      double floor2) {
    const Eigen::Index w = pts.cols();
    const double* base = pts.data();
    const double* yi = base + static_cast<std::ptrdiff_t>(i) * w;
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = n;
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t gap = i > j ? i - j : j - i;
        if (gap <= static_cast<std::size_t>(theiler)) continue;
        const double d2 = squared_distance(yi, base + static_cast<std::ptrdiff_t>(j) * w, w);
        if (d2 > floor2 && d2 < best) {
            best = d2;
            arg = j;
        }
    }
    if (arg == n) return std::nullopt;
    return std::make_pair(arg, best);
}

struct LineFit {
    double slope = 0;
    double r = 0;
};

LineFit fit_line(const std::vector<double>& y, std::size_t s, std::size_t e) {
    const double n = static_cast<double>(e - s);
    double mx = 0, my = 0;
    for (std::size_t j = s; j < e; ++j) {
        mx += static_cast<double>(j);
        my += y[j];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t j = s; j < e; ++j) {
        const double dx = static_cast<double>(j) - mx, dy = y[j] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    LineFit f;
    f.slope = sxy / sxx;
    f.r = syy > 0 ? sxy / std::sqrt(sxx * syy) : 0.0;
    return f;
}

}  // namespace

double mutual_information(const std::vector<double>& series, int tau) {
    require_not_constant(series);
    require(tau >= 0 && static_cast<std::size_t>(tau) + 2 <= series.size(), ErrorCode::Domain, "delay out of range");
    const int bins = bin_count(series.size());
    return information_from_bins(equiprobable_bins(series, bins), bins, tau);
}

DelayChoice mutual_information_delay(const std::vector<double>& series, int tau_max) {
    require(tau_max >= 1, ErrorCode::Domain, "tau_max must be >= 1");
    require(series.size() >= 10 * static_cast<std::size_t>(tau_max), ErrorCode::InsufficientData,
            "series needs at least 10 * tau_max samples");
    require_not_constant(series);
    const int bins = bin_count(series.size());
    const auto bin = equiprobable_bins(series, bins);

    DelayChoice out;
    out.information.resize(static_cast<std::size_t>(tau_max) + 1);
    for (int t = 0; t <= tau_max; ++t) out.information[t] = information_from_bins(bin, bins, t);
    const auto& info = out.information;
    for (int t = 1; t < tau_max; ++t)
        if (info[t] < info[t - 1] && info[t] < info[t + 1]) {
            out.tau = t;
            return out;
        }
    out.fallback = true;
    out.tau = static_cast<int>(std::min_element(info.begin() + 1, info.end()) - info.begin());
    return out;
}

Matrix embed(const Matrix& series, int m, int tau) {
    require(m >= 1 && tau >= 1, ErrorCode::Domain, "embedding needs m >= 1 and tau >= 1");
    const Eigen::Index T = series.rows(), d = series.cols();
    const Eigen::Index span = static_cast<Eigen::Index>(m - 1) * tau;
    require(T > span, ErrorCode::Shape,
            "series of length " + std::to_string(T) + " is too short for m=" + std::to_string(m) +
                ", tau=" + std::to_string(tau));
    const Eigen::Index n = T - span;
    Matrix out(n, m * d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (int b = 0; b < m; ++b) out.block(i, b * d, 1, d) = series.row(i + static_cast<Eigen::Index>(b) * tau);
    return out;
}

namespace {
// Neighbour search in the false-neighbour test is brute force; these caps keep it
// to a few seconds on long series.
constexpr Eigen::Index kFnnMaxRows = 20000;
constexpr std::size_t kFnnReferences = 1000;
}  // namespace

double false_neighbor_fraction(const Matrix& full, int tau, int m, int theiler) {
    require(m >= 1 && tau >= 1 && theiler >= 0, ErrorCode::Domain, "invalid false-neighbour parameters");
    const Matrix series = full.topRows(std::min(full.rows(), kFnnMaxRows));
    const Eigen::Index T = series.rows();
    const Eigen::Index n = T - static_cast<Eigen::Index>(m) * tau;
    require(n >= 2, ErrorCode::InsufficientData, "series too short for false-neighbour test at m=" + std::to_string(m));

    const Eigen::RowVectorXd mean = series.colwise().mean();
    const double attractor = std::sqrt((series.rowwise() - mean).array().square().sum() / static_cast<double>(T));
    require(attractor > 0, ErrorCode::Degenerate, "series is constant");

    const Matrix pts = embed(series.topRows(n + static_cast<Eigen::Index>(m - 1) * tau), m, tau);
    const double floor2 = std::pow(1e-12 * attractor, 2);
    std::size_t considered = 0, false_count = 0;
    for (std::size_t i : spread_indices(static_cast<std::size_t>(n), kFnnReferences)) {
        const auto nn = nearest(pts, i, static_cast<std::size_t>(n), theiler, floor2);
        if (!nn) continue;
        const double r = std::sqrt(nn->second);
        const Eigen::Index ahead = static_cast<Eigen::Index>(m) * tau;
        const double extra =
            (series.row(static_cast<Eigen::Index>(i) + ahead) - series.row(static_cast<Eigen::Index>(nn->first) + ahead))
                .norm();
        ++considered;
        if (extra / r > 10.0 || std::sqrt(r * r + extra * extra) / attractor > 2.0) ++false_count;
    }
    require(considered > 0, ErrorCode::InsufficientData, "no admissible neighbours for the false-neighbour test");
    return static_cast<double>(false_count) / static_cast<double>(considered);
}

int false_nearest_neighbors(const Matrix& series, int tau, int m_max, int theiler) {
    require(m_max >= 1, ErrorCode::Domain, "m_max must be >= 1");
    for (int m = 1; m < m_max; ++m)
        if (false_neighbor_fraction(series, tau, m, theiler) < 0.01) return m;
    return m_max;
}

DivergenceCurve divergence_curve(const Matrix& points, double dt, int theiler, std::size_t m_refs, std::size_t j_max) {
    require(j_max >= 5, ErrorCode::Domain, "j_max must be >= 5");
    require(dt > 0, ErrorCode::Domain, "dt must be > 0");
    require(m_refs >= 1 && theiler >= 0, ErrorCode::Domain, "invalid reference count or Theiler window");
    const std::size_t N = static_cast<std::size_t>(points.rows());
    require(N >= j_max + 1, ErrorCode::InsufficientData, "too few points for j_max=" + std::to_string(j_max));
    const std::size_t usable = N - j_max + 1;
    const Eigen::Index w = points.cols();

    const auto refs = spread_indices(usable, m_refs);
    std::vector<std::optional<std::pair<std::size_t, double>>> found(refs.size());
    for (std::size_t k = 0; k < refs.size(); ++k) found[k] = nearest(points, refs[k], usable, theiler, 0.0);

    DivergenceCurve curve;
    curve.dt = dt;
    std::vector<double> sum(j_max, 0.0);
    std::vector<std::size_t> count(j_max, 0);
    for (std::size_t k = 0; k < refs.size(); ++k) {
        if (!found[k]) continue;
        const std::size_t i = refs[k], n = found[k]->first;
        curve.pairs.push_back({i, n, std::sqrt(found[k]->second)});
        for (std::size_t j = 0; j < j_max; ++j) {
            const double d2 = squared_distance(points.data() + static_cast<std::ptrdiff_t>(i + j) * w,
                                               points.data() + static_cast<std::ptrdiff_t>(n + j) * w, w);
            if (d2 > 0) {
                sum[j] += 0.5 * std::log(d2);
                ++count[j];
            }
        }
    }
    require(2 * curve.pairs.size() >= refs.size(), ErrorCode::InsufficientData,
            "no admissible neighbour for more than half of the " + std::to_string(refs.size()) + " references");
    curve.d.resize(j_max);
    for (std::size_t j = 0; j < j_max; ++j) {
        require(count[j] > 0, ErrorCode::InsufficientData, "every pair coincides at step " + std::to_string(j));
        curve.d[j] = sum[j] / static_cast<double>(count[j]);
    }
    return curve;
}

LyapunovEstimate fit_lyapunov(const DivergenceCurve& curve) {
    constexpr std::size_t kMinWindow = 5;
    constexpr double kMinCorrelation = 0.99;
    constexpr double kSaturation = 0.9;
    const auto& y = curve.d;
    const std::size_t all = y.size();
    require(all >= kMinWindow, ErrorCode::Domain, "divergence curve needs at least 5 points");
    for (double v : y) require(std::isfinite(v), ErrorCode::Domain, "divergence curve has non-finite values");

    // Only the growth region before saturation is searched: the curve is cut at
    // the first point reaching 90% of its total rise.
    const auto [lo_it, hi_it] = std::minmax_element(y.begin(), y.end());
    std::size_t n = all;
    for (std::size_t j = 0; j < all; ++j)
        if (y[j] >= *lo_it + kSaturation * (*hi_it - *lo_it)) {
            n = std::max(j + 1, kMinWindow);
            break;
        }

    // bad[s] counts 5-point windows starting before s whose correlation is below threshold.
    std::vector<std::size_t> bad(n - kMinWindow + 2, 0);
    for (std::size_t s = 0; s + kMinWindow <= n; ++s)
        bad[s + 1] = bad[s] + (fit_line(y, s, s + kMinWindow).r >= kMinCorrelation ? 0 : 1);

    LyapunovEstimate est;
    est.curve = curve;
    bool found = false;
    for (std::size_t len = n; len >= kMinWindow && !found; --len)
        for (std::size_t s = 0; s + len <= n; ++s) {
            const std::size_t last = s + len - kMinWindow;
            if (bad[last + 1] - bad[s] != 0) continue;
            if (fit_line(y, s, s + len).r < kMinCorrelation) continue;
            est.fit_start = s;
            est.fit_end = s + len;
            found = true;
            break;
        }
    if (!found) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t len = n; len >= kMinWindow; --len)
            for (std::size_t s = 0; s + len <= n; ++s) {
                const double r = fit_line(y, s, s + len).r;
                if (r > best) {
                    best = r;
                    est.fit_start = s;
                    est.fit_end = s + len;
                }
            }
        est.low_confidence = true;
    }
    const LineFit f = fit_line(y, est.fit_start, est.fit_end);
    est.lambda_max = f.slope / curve.dt;
    est.r2 = std::clamp(f.r * f.r, 0.0, 1.0);
    return est;
}

LyapunovEstimate estimate_lyapunov(const Trajectory& traj, const LyapunovOptions& opt) {
    traj.validate();
    const std::size_t T = traj.steps();
    require(T >= 20, ErrorCode::InsufficientData, "trajectory too short for Lyapunov estimation");

    DelayChoice delay;
    if (opt.tau) {
        require(*opt.tau >= 1, ErrorCode::Config, "tau override must be >= 1");
        delay.tau = *opt.tau;
    } else {
        const int tau_max = std::max(1, std::min(opt.tau_max, static_cast<int>(T / 10)));
        delay = mutual_information_delay(column(traj.data, 0), tau_max);
    }

    EmbeddingParams params;
    params.tau = delay.tau;
    params.theiler = opt.theiler ? *opt.theiler : 10 * delay.tau;
    const Matrix observable = opt.full_state ? traj.data : Matrix(traj.data.leftCols(1));
    // A fully observed state needs no delay reconstruction.
    if (opt.m) params.m = *opt.m;
    else if (observable.cols() > 1) params.m = 1;
    else params.m = false_nearest_neighbors(observable, params.tau, opt.m_max, params.theiler);
    require(params.m >= 1, ErrorCode::Config, "m override must be >= 1");

    const Matrix points = embed(observable, params.m, params.tau);
    const DivergenceCurve curve = divergence_curve(points, traj.dt, params.theiler, opt.refs.value_or(kDefaultReferences),
                                                   opt.j_max.value_or(kDefaultJMax));
    LyapunovEstimate est = fit_lyapunov(curve);
    est.params = params;
    est.tau_fallback = delay.fallback;
    return est;
}

}  // namespace hcr
