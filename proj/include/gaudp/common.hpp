#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace gaudp {

// Bad flags, malformed files, inconsistent shapes requested by the user.
// CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// NaN losses, degenerate inputs discovered mid-computation.
// CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

// Global worker count for parallel_for. 0 means hardware_concurrency.
// Thread count never changes results: work items are independent and any
// reductions happen afterwards in index order.
int worker_threads();
void set_worker_threads(int n);

// Runs fn(i) for i in [0, n) on static contiguous chunks.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace gaudp
