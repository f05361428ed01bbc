// Copyright 2026 The qcp-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "qcp/common.h"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace qcp {

uint64_t mix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

uint64_t derive_seed(uint64_t master, uint64_t index) {
    return mix64(master ^ mix64(index + 0x632BE59BD9B4E019ULL));
}

double uniform01(Rng &rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

uint64_t uniform_below(Rng &rng, uint64_t n) {
    if (n == 0) {
        throw std::invalid_argument("uniform_below: empty range");
    }
    // Rejection sampling keeps the draw exactly uniform.
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    while (true) {
        uint64_t r = rng();
        if (r < limit) {
            return r % n;
        }
    }
}

size_t sample_index(Rng &rng, const std::vector<double> &weights) {
    double total = 0;
    for (double w : weights) {
        total += std::max(w, 0.0);
    }
    if (!(total > 0)) {
        throw std::invalid_argument("sample_index: weights sum to zero");
    }
    double u = uniform01(rng) * total;
    double acc = 0;
    size_t last_positive = 0;
    for (size_t i = 0; i < weights.size(); i++) {
        double w = std::max(weights[i], 0.0);
        if (w > 0) {
            last_positive = i;
        }
        acc += w;
        if (u < acc) {
            return i;
        }
    }
    return last_positive;
}

unsigned worker_count() {
    const char *env = std::getenv("QCP_THREADS");
    if (env == nullptr || *env == '\0') {
        return 1;
    }
    int v = std::atoi(env);
    return static_cast<unsigned>(std::clamp(v, 1, 64));
}

void parallel_for(size_t n, unsigned threads, const std::function<void(size_t)> &fn) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<size_t>(n, 1))));
    if (threads == 1) {
        for (size_t i = 0; i < n; i++) {
            fn(i);
        }
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; t++) {
        pool.emplace_back([&] {
            while (true) {
                size_t i = next.fetch_add(1);
                if (i >= n) {
                    return;
                }
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) {
                        failure = std::current_exception();
                    }
                    next.store(n);
                    return;
                }
            }
        });
    }
    for (auto &th : pool) {
        th.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

unsigned index_bits(uint64_t n) {
    if (n <= 2) {
        return 1;
    }
    return static_cast<unsigned>(std::bit_width(n - 1));
}

std::pair<double, double> wilson_ci95(uint64_t successes, uint64_t trials) {
    if (trials == 0) {
        return {0.0, 1.0};
    }
    const double z = 1.959963984540054;
    double n = static_cast<double>(trials);
    double p = static_cast<double>(successes) / n;
    double denom = 1 + z * z / n;
    double center = (p + z * z / (2 * n)) / denom;
    double half = z * std::sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom;
    return {std::clamp(center - half, 0.0, p), std::clamp(center + half, p, 1.0)};
}

}  // namespace qcp
