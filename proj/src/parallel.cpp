#include "eit/parallel.hpp"

#include <omp.h>

#include <atomic>
#include <cstdlib>
#include <string>

namespace eit {

namespace {

int read_thread_count() {
    int n = omp_get_max_threads();
    if (const char* env = std::getenv("EIT_THREADS")) {
        try {
            int cap = std::stoi(env);
            if (cap >= 1 && cap < n) n = cap;
            if (cap >= 1 && cap >= n) n = std::min(cap, omp_get_max_threads());
        } catch (...) {
            // malformed value: ignore, keep the OpenMP default
        }
    }
    return n < 1 ? 1 : n;
}

std::atomic<int> g_threads{-1};

}  // namespace

int thread_count() {
    int n = g_threads.load(std::memory_order_relaxed);
    if (n < 0) {
        n = read_thread_count();
        g_threads.store(n, std::memory_order_relaxed);
    }
    return n;
}

void refresh_thread_count() { g_threads.store(read_thread_count(), std::memory_order_relaxed); }

}  // namespace eit
