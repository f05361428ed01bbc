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

#ifndef QCP_COMMON_H
#define QCP_COMMON_H

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qcp {

using Complex = std::complex<double>;
using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;
using Rng = std::mt19937_64;

/// Raised when a dimension or width precondition is violated.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Raised when a request would exceed a configured size cap.
struct ResourceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised when a game participant steps outside its allowed interface.
struct ProtocolViolation : std::logic_error {
    using std::logic_error::logic_error;
};

/// Raised when an in-line invariant check fails.
struct InvariantViolation : std::logic_error {
    using std::logic_error::logic_error;
};

// Numerical tolerances shared across modules.
inline constexpr double kNormTol = 1e-10;
inline constexpr double kHermitianTol = 1e-9;
inline constexpr double kPsdTol = 1e-9;
inline constexpr double kEigenMergeTol = 1e-9;

/// SplitMix64 finalizer.
uint64_t mix64(uint64_t x);

/// Seed for sub-stream `index` of a master seed. Streams are independent of
/// the order in which they are requested.
uint64_t derive_seed(uint64_t master, uint64_t index);

/// Uniform double in [0, 1) using the top 53 bits of one draw.
double uniform01(Rng &rng);

/// Uniform integer in [0, n).
uint64_t uniform_below(Rng &rng, uint64_t n);

/// Samples an index from unnormalized non-negative weights.
size_t sample_index(Rng &rng, const std::vector<double> &weights);

/// Worker count: QCP_THREADS if set (clamped to [1, 64]), else 1.
unsigned worker_count();

/// Runs fn(i) for i in [0, n) on up to `threads` workers. fn must only write
/// to per-index storage.
void parallel_for(size_t n, unsigned threads, const std::function<void(size_t)> &fn);

/// Number of bits needed to index `n` values (at least 1).
unsigned index_bits(uint64_t n);

/// 95% Wilson score interval for a binomial proportion; [0, 1] when trials = 0.
std::pair<double, double> wilson_ci95(uint64_t successes, uint64_t trials);

}  // namespace qcp

#endif
