#include "hcr/dynamics.hpp"

#include <cmath>
#include <random>

namespace hcr {

namespace {

constexpr double kPi = 3.14159265358979323846;
// Contour points for the ETDRK4 coefficient integrals (Kassam & Trefethen 2005).
constexpr int kContourPoints = 32;

bool all_finite(const KsStepper::Spectrum& v) {
    for (const auto& z : v)
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    return true;
}

}  // namespace

KsStepper::KsStepper(int grid_points, double length, double h) : n_(grid_points), length_(length), h_(h) {
    validate_system(KsParams{grid_points, length});
    require(h > 0 && std::isfinite(h), ErrorCode::Config, "ks step must be positive");

    // Nyquist wavenumber is zeroed so the odd-derivative term stays real.
    wavenumber_.assign(n_, 0.0);
    for (int j = 0; j < n_; ++j) {
        int m = j < n_ / 2 ? j : (j == n_ / 2 ? 0 : j - n_);
        wavenumber_[j] = 2.0 * kPi * m / length_;
    }

    e_.resize(n_);
    e2_.resize(n_);
    q_.resize(n_);
    f1_.resize(n_);
    f2_.resize(n_);
    f3_.resize(n_);
    for (int j = 0; j < n_; ++j) {
        const double k = wavenumber_[j];
        const double lin = k * k - k * k * k * k;
        e_[j] = std::exp(h_ * lin);
        e2_[j] = std::exp(h_ * lin / 2.0);
        std::complex<double> q{0}, f1{0}, f2{0}, f3{0};
        for (int c = 1; c <= kContourPoints; ++c) {
            const auto r = std::exp(std::complex<double>(0, kPi * (c - 0.5) / kContourPoints));
            const std::complex<double> lr = h_ * lin + r;
            const std::complex<double> elr = std::exp(lr);
            const std::complex<double> lr3 = lr * lr * lr;
            q += (std::exp(lr / 2.0) - 1.0) / lr;
            f1 += (-4.0 - lr + elr * (4.0 - 3.0 * lr + lr * lr)) / lr3;
            f2 += (2.0 + lr + elr * (-2.0 + lr)) / lr3;
            f3 += (-4.0 - 3.0 * lr - lr * lr + elr * (4.0 - lr)) / lr3;
        }
        q_[j] = h_ * (q / double(kContourPoints)).real();
        f1_[j] = h_ * (f1 / double(kContourPoints)).real();
        f2_[j] = h_ * (f2 / double(kContourPoints)).real();
        f3_[j] = h_ * (f3 / double(kContourPoints)).real();
    }
}

KsStepper::Spectrum KsStepper::forward(const Vector& u) const {
    require(u.size() == n_, ErrorCode::Shape, "ks state has wrong size");
    Spectrum phys(n_);
    for (int j = 0; j < n_; ++j) phys[j] = u[j];
    Spectrum spec;
    fft_.fwd(spec, phys);
    return spec;
}

void KsStepper::inverse(const Spectrum& v, Eigen::Ref<Eigen::RowVectorXd> out) const {
    fft_.inv(scratch_, v);
    for (int j = 0; j < n_; ++j) out[j] = scratch_[j].real();
}

// Spectral form of -u u_x = -0.5 (u^2)_x.
void KsStepper::nonlinear(const Spectrum& v, Spectrum& out) const {
    fft_.inv(scratch_, v);
    for (auto& z : scratch_) z = std::complex<double>(z.real() * z.real(), 0.0);
    fft_.fwd(out, scratch_);
    for (int j = 0; j < n_; ++j) out[j] *= std::complex<double>(0.0, -0.5 * wavenumber_[j]);
}

void KsStepper::advance(Spectrum& v) const {
    Spectrum nv(n_), a(n_), na(n_), b(n_), nb(n_), c(n_), nc(n_);
    nonlinear(v, nv);
    for (int j = 0; j < n_; ++j) a[j] = e2_[j] * v[j] + q_[j] * nv[j];
    nonlinear(a, na);
    for (int j = 0; j < n_; ++j) b[j] = e2_[j] * v[j] + q_[j] * na[j];
    nonlinear(b, nb);
    for (int j = 0; j < n_; ++j) c[j] = e2_[j] * a[j] + q_[j] * (2.0 * nb[j] - nv[j]);
    nonlinear(c, nc);
    for (int j = 0; j < n_; ++j)
        v[j] = e_[j] * v[j] + nv[j] * f1_[j] + 2.0 * (na[j] + nb[j]) * f2_[j] + nc[j] * f3_[j];
    // Keep the spectrum Hermitian. Rounding otherwise seeds an anti-Hermitian
    // (purely imaginary in physical space) component that the real-valued
    // nonlinear term never sees, so unstable modes grow without bound.
    v[0] = v[0].real();
    v[n_ / 2] = v[n_ / 2].real();
    for (int j = 1; j < n_ / 2; ++j) {
        const std::complex<double> m = 0.5 * (v[j] + std::conj(v[n_ - j]));
        v[j] = m;
        v[n_ - j] = std::conj(m);
    }
}

void KsStepper::step(Vector& u) const {
    Spectrum v = forward(u);
    advance(v);
    require(all_finite(v), ErrorCode::DivergedIntegration, "ks spectral coefficients became non-finite");
    Eigen::RowVectorXd row(n_);
    inverse(v, row);
    u = row.transpose();
}

Trajectory integrate_ks(const Vector& u0, const KsParams& params, const SimulationOptions& opt) {
    require(opt.dt > 0 && opt.substeps >= 1 && opt.steps >= 1, ErrorCode::Config, "invalid ks sampling options");
    require(u0.size() == params.grid_points, ErrorCode::Shape, "ks initial state has wrong size");
    KsStepper stepper(params.grid_points, params.length, opt.dt / opt.substeps);
    KsStepper::Spectrum v = stepper.forward(u0);

    Trajectory out;
    out.dt = opt.dt;
    out.source = Source::KuramotoSivashinsky;
    out.data.resize(static_cast<Eigen::Index>(opt.steps), params.grid_points);
    const std::size_t total = opt.transient + opt.steps;
    for (std::size_t s = 0; s < total; ++s) {
        for (int sub = 0; sub < opt.substeps; ++sub) stepper.advance(v);
        if (!all_finite(v))
            fail(ErrorCode::DivergedIntegration,
                 "ks spectral coefficients became non-finite at step " + std::to_string(s));
        if (s >= opt.transient) stepper.inverse(v, out.data.row(static_cast<Eigen::Index>(s - opt.transient)));
    }
    return out;
}

Trajectory simulate_ks(const KsParams& params, const SimulationOptions& opt) {
    validate_system(params);
    std::mt19937_64 rng(derive_seed(opt.seed, 0x4b5));
    std::normal_distribution<double> normal(0.0, 0.1);
    Vector u0(params.grid_points);
    for (Eigen::Index j = 0; j < u0.size(); ++j) u0[j] = normal(rng);
    return integrate_ks(u0, params, opt);
}

}  // namespace hcr
