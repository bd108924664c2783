#pragma once

#include <cstddef>
#include <functional>
#include <string>

namespace mvo {

/// Caps the worker count used by parallel sections. 0 means
/// hardware_concurrency.
void set_max_threads(int n);
int max_threads();

/// Runs fn(i) for i in [0, count) on up to max_threads() workers. Results
/// must be written to per-index slots; the partition is deterministic.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

enum class LogLevel { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

/// Level comes from the MVO_LOG environment variable
/// (error|warn|info|debug), default warn.
LogLevel log_level();
void log(LogLevel level, const std::string& message);

}  // namespace mvo
