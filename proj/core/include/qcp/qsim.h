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

#ifndef QCP_QSIM_H
#define QCP_QSIM_H

#include <atomic>
#include <nlohmann/json.hpp>
#include <string>
#include <variant>
#include <vector>

#include "qcp/common.h"
#include "qcp/f2.h"

namespace qcp {

inline constexpr unsigned kMaxPureQubits = 22;
inline constexpr unsigned kMaxMixedQubits = 12;

struct Register {
    std::string name;
    unsigned qubits;
    bool operator==(const Register &other) const = default;
};

/// Ordered named registers. The first register holds the most significant
/// bits of a basis index, so |a>|b> has index (a << width(b)) | b.
class RegisterLayout {
   public:
    RegisterLayout() = default;
    explicit RegisterLayout(std::vector<Register> registers);

    const std::vector<Register> &registers() const { return registers_; }
    unsigned total_qubits() const { return total_; }
    uint64_t dim() const { return uint64_t{1} << total_; }

    bool has(const std::string &name) const;
    const Register &at(const std::string &name) const;
    /// Bit position of the register's least significant qubit.
    unsigned shift(const std::string &name) const;
    unsigned width(const std::string &name) const { return at(name).qubits; }
    uint64_t value_of(uint64_t index, const std::string &name) const;
    uint64_t with_value(uint64_t index, const std::string &name, uint64_t value) const;

    /// Concatenation; names must stay unique.
    RegisterLayout operator+(const RegisterLayout &other) const;
    /// Sub-layout of the given registers, kept in this layout's order.
    RegisterLayout subset(const std::vector<std::string> &names) const;
    std::vector<std::string> names() const;

    bool operator==(const RegisterLayout &other) const { return registers_ == other.registers_; }

    nlohmann::json to_json() const;

   private:
    std::vector<Register> registers_;
    unsigned total_ = 0;
};

/// Maps basis indices of a layout onto (local, rest) index pairs for a
/// chosen set of registers. Local bits are packed in layout order.
class IndexSplit {
   public:
    IndexSplit(const RegisterLayout &layout, const std::vector<std::string> &local);

    uint64_t local_dim() const { return uint64_t{1} << local_bits_; }
    uint64_t rest_dim() const { return uint64_t{1} << rest_bits_; }
    uint64_t local_of(uint64_t index) const;
    uint64_t rest_of(uint64_t index) const;
    uint64_t join(uint64_t local, uint64_t rest) const;

   private:
    struct Span {
        unsigned shift;
        unsigned width;
    };
    std::vector<Span> local_spans_;
    std::vector<Span> rest_spans_;
    unsigned local_bits_ = 0;
    unsigned rest_bits_ = 0;
};

/// Pure (state vector) or mixed (density matrix) state over a layout.
class QuantumState {
   public:
    /// The zero-qubit state (amplitude 1); a unit for tensor().
    QuantumState() : data_(Vec(Vec::Ones(1))) {}

    static QuantumState pure(RegisterLayout layout, Vec amplitudes);
    static QuantumState mixed(RegisterLayout layout, Mat density);
    /// Like mixed() but checks only shape and trace; for densities produced
    /// by valid operations on a valid state.
    static QuantumState mixed_trusted(RegisterLayout layout, Mat density);
    static QuantumState basis(RegisterLayout layout, uint64_t index);
    /// |0...0> over the given layout.
    static QuantumState zeros(RegisterLayout layout) { return basis(std::move(layout), 0); }

    const RegisterLayout &layout() const { return layout_; }
    bool is_pure() const { return std::holds_alternative<Vec>(data_); }
    const Vec &vector() const;
    const Mat &matrix() const;
    /// Density matrix (converting from pure form when needed).
    Mat density() const;
    QuantumState as_mixed() const;

    double trace() const;

    nlohmann::json to_json() const;
    static QuantumState from_json(const nlohmann::json &j);

   private:
    QuantumState(RegisterLayout layout, std::variant<Vec, Mat> data)
        : layout_(std::move(layout)), data_(std::move(data)) {}

    RegisterLayout layout_;
    std::variant<Vec, Mat> data_;
};

/// Tensor product; registers of `b` follow those of `a`.
QuantumState tensor(const QuantumState &a, const QuantumState &b);

/// Uniform superposition over the members of `s` in register `name`.
QuantumState prepare_subspace_state(const F2Subspace &s, const std::string &name = "A");

/// Applies H on every qubit of `reg`.
QuantumState hadamard_all(const QuantumState &state, const std::string &reg);
void hadamard_all_inplace(Vec &psi, const RegisterLayout &layout, const std::string &reg);

/// Applies `op` (local_dim x local_dim) to the listed registers of a vector.
/// The operator need not be unitary.
Vec apply_local(const Vec &psi, const RegisterLayout &layout, const std::vector<std::string> &regs, const Mat &op);
/// rho -> (op (x) I) rho (op (x) I)^dagger.
Mat apply_local(const Mat &rho, const RegisterLayout &layout, const std::vector<std::string> &regs, const Mat &op);

/// Tr[(op (x) I) rho].
double local_expectation(const QuantumState &state, const std::vector<std::string> &regs, const Mat &op);

/// Tr[(|a><a| (x) I) rho] for a unit vector a on `regs`, without forming the
/// dense projector.
double rank_one_expectation(const QuantumState &state, const std::vector<std::string> &regs, const Vec &a);
/// (|a><a| (x) I) applied to the state and renormalized. Throws
/// std::invalid_argument when the projection has probability zero.
QuantumState rank_one_postselect(const QuantumState &state, const std::vector<std::string> &regs, const Vec &a);

/// Reduced state on `keep` (kept in layout order).
QuantumState partial_trace(const QuantumState &state, const std::vector<std::string> &keep);

/// Pure state over the input registers plus a fresh register `purifier_name`
/// whose partial trace recovers the input.
QuantumState purify(const QuantumState &state, const std::string &purifier_name = "B");

/// Half the trace norm of the difference.
double trace_distance(const QuantumState &a, const QuantumState &b);

/// |<a|b>|^2 for pure states, <a|rho|a> when one side is mixed.
double fidelity(const QuantumState &a, const QuantumState &b);

struct MeasureResult {
    uint64_t outcome;
    QuantumState post;
    double prob;
};

/// Born-rule probabilities of every value of `reg`.
std::vector<double> outcome_probabilities(const QuantumState &state, const std::string &reg);

/// Computational-basis measurement of one register.
MeasureResult measure_register(const QuantumState &state, const std::string &reg, Rng &rng);

/// Collapses `reg` to `value`; returns the normalized post-state and its probability.
MeasureResult postselect_register(const QuantumState &state, const std::string &reg, uint64_t value);

/// Removes a register that is in a product basis state |value>.
QuantumState drop_register(const QuantumState &state, const std::string &reg);

struct GentleResult {
    int outcome;  // 0: projector accepted, 1: rejected
    QuantumState post;
    double prob;
    double recovered_distance;
};

/// Binary projective measurement (projector, I - projector) on `regs` (all
/// registers when empty). Checks in-line that the post-state is within
/// sqrt(1 - prob) of the input in trace distance; throws InvariantViolation
/// otherwise.
GentleResult gentle_measure(const QuantumState &state, const Mat &projector, Rng &rng,
                            const std::vector<std::string> &regs = {});

/// As gentle_measure with the outcome fixed to `outcome` (postselection).
/// Throws when that outcome has probability zero.
GentleResult gentle_postselect(const QuantumState &state, const Mat &projector, int outcome,
                               const std::vector<std::string> &regs = {});

struct GentleStats {
    uint64_t invocations = 0;
    uint64_t violations = 0;
    double worst_slack = 0;  // max of distance - sqrt(eps) seen so far
};
GentleStats gentle_stats();

bool is_projector(const Mat &m, double tol = kHermitianTol);
bool is_hermitian(const Mat &m, double tol = kHermitianTol);

/// Eigenvalues of a Hermitian matrix in ascending order.
Eigen::VectorXd hermitian_eigenvalues(const Mat &m);

}  // namespace qcp

#endif
