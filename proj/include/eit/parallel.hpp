#pragma once

#include <cstddef>

namespace eit {

/// Number of threads parallel kernels may use: OpenMP's limit, further capped
/// by the EIT_THREADS environment variable when set. Always >= 1.
int thread_count();

/// Re-read EIT_THREADS (for tests that change the environment).
void refresh_thread_count();

}  // namespace eit
