#pragma once

#include "hcr/common.hpp"

#include <unsupported/Eigen/FFT>

#include <complex>
#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>

namespace hcr {

enum class Source { Lorenz96, KuramotoSivashinsky, Logistic, External };

const char* source_name(Source s);

/// A T x d time series sampled every `dt` time units.
struct Trajectory {
    Matrix data;
    double dt = 1.0;
    Source source = Source::External;

    std::size_t steps() const { return static_cast<std::size_t>(data.rows()); }
    std::size_t dim() const { return static_cast<std::size_t>(data.cols()); }

    /// Rows [begin, begin + count) as a new trajectory with the same dt and source.
    Trajectory slice(std::size_t begin, std::size_t count) const;

    /// Throws Shape/Domain errors when T < 2, d < 1, dt <= 0 or an entry is non-finite.
    void validate() const;
};

struct Lorenz96Params {
    int dim = 40;
    double forcing = 8.0;
};

struct KsParams {
    int grid_points = 64;
    double length = 22.0 * 3.14159265358979323846;
};

struct LogisticParams {
    double r = 4.0;
};

struct ExternalSource {
    std::string path;
};

using SystemSpec = std::variant<Lorenz96Params, KsParams, LogisticParams, ExternalSource>;

void validate_system(const SystemSpec& spec);

/// Sampling and integration controls shared by the simulators.
///
/// `dt` is the sampling interval of the returned trajectory. Each sample is
/// produced by `substeps` integrator steps of size dt / substeps, which lets a
/// coarse sampling interval coexist with a stable integration step.
struct SimulationOptions {
    double dt = 0.01;
    int substeps = 1;
    std::size_t steps = 1000;
    std::size_t transient = 1000;
    std::uint64_t seed = 0;
};

/// Right-hand side dx_i/dt = (x_{i+1} - x_{i-2}) x_{i-1} - x_i + F with cyclic indices.
void lorenz96_rhs(const Vector& x, double forcing, Vector& out);

void rk4_step_lorenz96(Vector& x, double forcing, double h, Vector work[4]);

/// Integrates Lorenz-96 from an explicit initial state with classical RK4.
/// The transient (in samples) is discarded before recording.
Trajectory integrate_lorenz96(const Vector& x0, double forcing, const SimulationOptions& opt);

/// Lorenz-96 from x = F plus a small seeded perturbation on component 0.
Trajectory simulate_lorenz96(int dim, double forcing, const SimulationOptions& opt);

/// Fourier-grid ETDRK4 stepper for u_t = -u u_x - u_xx - u_xxxx on a periodic
/// domain. Holds an FFT plan cache, so one instance must not be shared across threads.
class KsStepper {
public:
    using Spectrum = std::vector<std::complex<double>>;

    KsStepper(int grid_points, double length, double h);

    int grid_points() const { return n_; }
    double step_size() const { return h_; }

    /// Advances a physical-space state by one step of size h.
    void step(Vector& u) const;

    Spectrum forward(const Vector& u) const;
    void inverse(const Spectrum& v, Eigen::Ref<Eigen::RowVectorXd> out) const;
    void advance(Spectrum& v) const;

private:
    void nonlinear(const Spectrum& v, Spectrum& out) const;

    int n_;
    double length_;
    double h_;
    std::vector<double> wavenumber_;
    std::vector<double> e_, e2_, q_, f1_, f2_, f3_;
    mutable Eigen::FFT<double> fft_;
    mutable Spectrum scratch_;
};

Trajectory integrate_ks(const Vector& u0, const KsParams& params, const SimulationOptions& opt);

/// KS from a seeded small random initial field (amplitude 0.1 per grid point).
Trajectory simulate_ks(const KsParams& params, const SimulationOptions& opt);

/// x_{t+1} = r x_t (1 - x_t); sampling interval is one iterate.
Trajectory simulate_logistic(const LogisticParams& params, double x0, std::size_t steps,
                             std::size_t transient);

/// Seeded initial condition in (0, 1) for logistic simulations.
double logistic_initial_condition(std::uint64_t seed);

/// Dispatches on the system variant. External specs load their CSV with `opt.dt`.
Trajectory simulate(const SystemSpec& spec, const SimulationOptions& opt);

/// Reads a rectangular numeric CSV (optional single header row).
Trajectory load_csv(const std::filesystem::path& path, double dt);

/// Writes one row per time step with 17 significant digits.
void save_csv(const Trajectory& traj, const std::filesystem::path& path,
              const std::vector<std::string>& header = {});

struct SplitSpec {
    double train = 0.6;
    double val = 0.2;
    double test = 0.2;
};

struct SplitResult {
    Trajectory train;
    Trajectory val;
    Trajectory test;
    Vector mean;
    Vector std;
};

/// Carves contiguous train/val/test segments and standardizes all three with
/// moments taken from the train segment only. Zero std components become 1.
SplitResult split_standardize(const Trajectory& traj, const SplitSpec& spec);

}  // namespace hcr
