#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace hcr {

/// Row-major dense matrix; rows are time steps or models throughout the library.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class ErrorCode {
    Config,
    Shape,
    Parse,
    Domain,
    DivergedIntegration,
    RolloutDiverged,
    Degenerate,
    InsufficientData,
    Unsupported,
    Numerical,
    Filesystem,
    MissingArtifact,
    Stage,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
    if (!cond) fail(code, what);
}

/// SplitMix64 finalizer. Used to derive independent per-item seeds from a
/// master seed so that results never depend on scheduling order.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return mix_seed(mix_seed(master) ^ mix_seed(index + 0x632be59bd9b4e019ULL));
}

/// Runs body(i) for i in [0, n) on up to `threads` workers. Each index is
/// visited exactly once; callers write into per-index slots, so the outcome
/// is independent of the schedule. The first exception is rethrown.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body) {
    if (n == 0) return;
    std::size_t workers = threads <= 1 ? 1 : std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace hcr
