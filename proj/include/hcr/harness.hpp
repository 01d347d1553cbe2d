#pragma once

#include "hcr/decision.hpp"
#include "hcr/dynamics.hpp"
#include "hcr/lyapunov.hpp"
#include "hcr/rashomon.hpp"
#include "hcr/reservoir.hpp"
#include "hcr/serialize.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hcr {

struct SystemConfig {
    SystemSpec spec = Lorenz96Params{5, 10.0};
    SimulationOptions sim{0.05, 5, 10000, 2000, 0};
    std::optional<std::uint64_t> seed;  // derived from the master seed when unset

    std::uint64_t effective_seed(std::uint64_t master) const;
};

struct RashomonConfig {
    bool calibrate = true;
    std::optional<std::size_t> band_lo;  // [5, 50] below 200 models, [10, 100] otherwise
    std::optional<std::size_t> band_hi;
    double alpha = 0.1, beta = 0, gamma = 0;  // used when calibrate is false
};

struct LyapunovConfig {
    std::size_t steps = 1000000;        // separate run for estimation (synthetic systems); KS defaults to 20000
    std::size_t oracle_steps = 200000;  // Benettin integrator steps, 0 to skip
    LyapunovOptions options;
};

struct DecisionSetup {
    UtilityFn utility = UtilityFn::asymmetric(2.0, 1.0);
    ActionSpace space = ActionSpace::box(Vector::Constant(1, -5.0), Vector::Constant(1, 5.0));
    std::optional<Vector> p_k;  // uniform when unset
    std::size_t sample_size = 10;
    OptimizerSpec optimizer;
    std::size_t random_repeats = 50;
    std::vector<std::size_t> sweep_sizes{1, 2, 4, 8, 16};
    std::size_t sweep_repeats = 20;
};

struct ExperimentConfig {
    SystemConfig system;
    SplitSpec split;
    std::string grid_preset = "desk";  // "desk", "full" or "custom"
    GridAxes grid = GridAxes::desk();
    ReservoirConfig reservoir;
    int horizons = 20;
    std::size_t warmup = 100;
    RashomonConfig rashomon;
    LyapunovConfig lyapunov;
    DecisionSetup decision;
    std::uint64_t master_seed = 0;
    std::filesystem::path output_dir = "hcr_out";
    int threads = 1;
    std::vector<double> sweep_forcing;  // optional F sweep (Lorenz-96 only)

    Vector p_k() const;
    std::pair<std::size_t, std::size_t> band() const;
    SimulationOptions simulation() const;  // with the effective seed
    void validate() const;
    /// Fully explicit resolved config. Thread count and output directory are left
    /// out so outputs do not depend on them.
    Json echo() const;
};

ExperimentConfig parse_config(const Json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Command-line overrides applied after parsing.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> out;
    std::optional<std::string> grid;
    std::optional<int> threads;
};

void apply_overrides(ExperimentConfig& cfg, const Overrides& o);

/// A failure inside a named pipeline stage.
class StageError : public Error {
public:
    StageError(std::string stage, const Error& cause);
    const std::string& stage() const { return stage_; }
    ErrorCode cause() const { return cause_; }

private:
    std::string stage_;
    ErrorCode cause_;
};

void cmd_simulate(const ExperimentConfig& cfg);
void cmd_pipeline(const ExperimentConfig& cfg);
void cmd_lyapunov(const ExperimentConfig& cfg);
void cmd_select(const ExperimentConfig& cfg);
void cmd_report(const std::filesystem::path& dir);

/// CSV helpers shared by the pipeline and the report.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);
std::vector<std::vector<std::string>> read_csv_rows(const std::filesystem::path& path);

}  // namespace hcr
