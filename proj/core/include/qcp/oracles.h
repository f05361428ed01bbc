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

#ifndef QCP_ORACLES_H
#define QCP_ORACLES_H

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "qcp/f2.h"
#include "qcp/qsim.h"

namespace qcp {

/// A total function [N] -> [2^m] stored as an explicit table.
class ClassicalFunction {
   public:
    ClassicalFunction() = default;
    ClassicalFunction(std::vector<uint64_t> table, unsigned out_bits);

    /// Uniformly random function drawn from `seed`. The whole table is drawn
    /// up front; at these sizes this is the same object as a lazily sampled one.
    static ClassicalFunction random(uint64_t domain, unsigned out_bits, uint64_t seed);
    static ClassicalFunction random(uint64_t domain, unsigned out_bits, Rng &rng);

    uint64_t domain() const { return table_.size(); }
    unsigned in_bits() const { return index_bits(table_.size()); }
    unsigned out_bits() const { return out_bits_; }
    uint64_t operator()(uint64_t x) const;
    const std::vector<uint64_t> &table() const { return table_; }

    bool operator==(const ClassicalFunction &other) const = default;

   private:
    std::vector<uint64_t> table_;
    unsigned out_bits_ = 0;
};

/// Pointwise XOR of two functions over the same domain and width.
ClassicalFunction operator^(const ClassicalFunction &a, const ClassicalFunction &b);

/// Reversible gate |in, y> -> |in, y xor enc(in)> with named flagged input
/// sets used for query-weight bookkeeping.
///
/// Oracles with a validity bit use a (1 + data_bits)-wide output where a
/// valid answer d is encoded as (1 << data_bits) | d and the invalid answer
/// is all zeros. Plain oracles XOR the data directly.
class InstrumentedOracle {
   public:
    InstrumentedOracle(std::string id, unsigned in_bits, unsigned data_bits, bool validity,
                       std::vector<uint64_t> encoded);

    const std::string &id() const { return id_; }
    unsigned in_bits() const { return in_bits_; }
    unsigned data_bits() const { return data_bits_; }
    bool has_validity() const { return validity_; }
    unsigned out_bits() const { return data_bits_ + (validity_ ? 1 : 0); }

    /// Encoded answer for the i-th query (counting queries of this oracle
    /// within one circuit run).
    uint64_t encoded(uint64_t input, uint64_t query_index = 0) const;
    /// Decoded answer; nullopt stands for the invalid symbol.
    std::optional<uint64_t> answer(uint64_t input, uint64_t query_index = 0) const;

    void add_flag_set(const std::string &name, std::vector<bool> members);
    const std::vector<std::pair<std::string, std::vector<bool>>> &flag_sets() const { return flags_; }

    /// Copy whose answers on (query_index, input) pairs in `replaced` are the
    /// invalid symbol.
    InstrumentedOracle with_replaced(const std::set<std::pair<uint64_t, uint64_t>> &replaced) const;

    const std::vector<uint64_t> &table() const { return encoded_; }

   private:
    std::string id_;
    unsigned in_bits_;
    unsigned data_bits_;
    bool validity_;
    std::vector<uint64_t> encoded_;
    std::vector<std::pair<std::string, std::vector<bool>>> flags_;
    std::set<std::pair<uint64_t, uint64_t>> replaced_;
};

using OraclePtr = std::shared_ptr<const InstrumentedOracle>;
/// Slot name -> oracle. Circuits name slots; bindings decide which oracle
/// answers them, so the same circuit can run against substituted oracles.
using OracleBinding = std::map<std::string, OraclePtr>;

/// Plain XOR gate for f.
InstrumentedOracle classical_gate(const ClassicalFunction &f, const std::string &id = "f");

/// One-bit oracle answering 1 iff v is a nonzero member of `s`. The flag set
/// `flag_name` marks the same inputs.
InstrumentedOracle membership_oracle(const F2Subspace &s, const std::string &id = "U_A",
                                     const std::string &flag_name = "A");

/// Oracle of input (x, v) with x < f.domain() answering `payload(x)` when v
/// is a nonzero member of `valid_on` and the invalid symbol otherwise. The
/// input packs x above the n bits of v. Flag sets "A" and "Aperp" are attached.
InstrumentedOracle subspace_gated_oracle(const std::string &id, const F2Subspace &a, const F2Subspace &valid_on,
                                         const ClassicalFunction &payload);

struct CpOracles {
    OraclePtr o1;
    OraclePtr o2;
};

/// O1(x, v) = f(x) xor g(x) on A \ {0}, O2(x, v) = g(x) on dual(A) \ {0}.
CpOracles cp_oracles(const F2Subspace &a, const ClassicalFunction &f, const ClassicalFunction &g);
/// O1'(x, v) = g(x) on A \ {0}, O2'(x, v) = f(x) xor g(x) on dual(A) \ {0}.
CpOracles swapped_cp_oracles(const F2Subspace &a, const ClassicalFunction &f, const ClassicalFunction &g);

/// Same widths as `like`, invalid on every input. Keeps the flag sets of
/// `like` so weights stay comparable after substitution.
InstrumentedOracle bot_oracle(const InstrumentedOracle &like, const std::string &id = "O_bot");
InstrumentedOracle bot_oracle(unsigned in_bits, unsigned data_bits, const std::string &id = "O_bot");

/// Answers on F = {(query index, input)} replaced by the invalid symbol.
InstrumentedOracle bbbv_modify(const InstrumentedOracle &oracle, const std::set<std::pair<uint64_t, uint64_t>> &f);

// ---------------------------------------------------------------------------
// Circuits

struct HadamardOp {
    std::string reg;
};
struct XorConstOp {
    std::string reg;
    uint64_t value;
};
/// Dense unitary on the listed registers (packed in layout order).
struct UnitaryOp {
    std::vector<std::string> regs;
    Mat u;
};
/// out ^= fn(in), `in` being the listed registers packed in the given order.
struct ClassicalOp {
    std::vector<std::string> inputs;
    std::string output;
    std::function<uint64_t(uint64_t)> fn;
};
/// Basis permutation of the listed registers (packed in the given order).
struct PermuteOp {
    std::vector<std::string> regs;
    std::function<uint64_t(uint64_t)> perm;
};
/// Oracle query: input = (prefix << width(inputs)) | inputs, output register
/// receives the encoded answer.
struct QueryOp {
    std::string slot;
    std::vector<std::string> inputs;
    uint64_t prefix = 0;
    unsigned prefix_bits = 0;
    std::string output;
};

using Op = std::variant<HadamardOp, XorConstOp, UnitaryOp, ClassicalOp, PermuteOp, QueryOp>;
using Circuit = std::vector<Op>;

/// Number of QueryOps of `circuit` aimed at `slot`.
size_t count_queries(const Circuit &circuit, const std::string &slot);

struct QueryRecord {
    std::string slot;
    std::string oracle_id;
    uint64_t query_index;
    std::map<std::string, double> weights;
    /// Pre-query probability of each oracle input (only when requested).
    std::vector<double> input_marginal;
};

/// Per-run list of query records; one record per gate application.
struct Transcript {
    bool record_marginals = false;
    std::vector<QueryRecord> records;

    size_t size() const { return records.size(); }
};

/// Total weight of `flag_set` over every recorded query (restricted to one
/// slot when `slot` is non-empty). Throws if no record carries that set.
double query_weight(const Transcript &t, const std::string &flag_set, const std::string &slot = "");

/// CSV rows (trial, oracle, query_index, flag_set, weight); writes a header
/// when `header` is set.
void write_transcript_csv(std::ostream &out, const Transcript &t, uint64_t trial, bool header);

struct RunOptions {
    /// Stop right before the n-th (0-based) query to this slot.
    std::optional<std::pair<std::string, uint64_t>> halt_before;
};

struct RunResult {
    bool halted = false;
    /// Number of ops of the circuit that were applied.
    size_t ops_applied = 0;
    std::map<std::string, uint64_t> queries;
};

/// Applies `circuit` to `psi` in place.
RunResult run_circuit(const Circuit &circuit, Vec &psi, const RegisterLayout &layout, const OracleBinding &binding,
                      Transcript *transcript = nullptr, const RunOptions &options = {});

/// Convenience wrapper over a pure QuantumState.
QuantumState run_circuit(const Circuit &circuit, const QuantumState &state, const OracleBinding &binding,
                         Transcript *transcript = nullptr);

/// Inverse of the first `prefix` ops of `circuit` (all ops by default).
/// Queries are involutions, so the inverse re-queries the same slots; it
/// assumes answers that do not depend on the query index.
Circuit invert_circuit(const Circuit &circuit, const RegisterLayout &layout, size_t prefix = SIZE_MAX);

struct BbbvReport {
    double distance;
    uint64_t queries;
    double flagged_weight;
    /// sqrt(T * W).
    double bound;
    /// 2 sqrt(T W). Changing an answer moves a flagged component by up to
    /// twice its norm (phase kickback on the output register), which is what
    /// the hybrid argument gives for the final pure states.
    double hybrid_bound;
};

/// Runs `circuit` from `psi` twice, once as is and once with the oracle in
/// `slot` modified on F, and compares the final states against
/// sqrt(T * sum_{(i, y) in F} W_{i,y}) with weights from the unmodified run.
/// Throws InvariantViolation if the distance exceeds the hybrid bound.
BbbvReport bbbv_compare(const Circuit &circuit, const Vec &psi, const RegisterLayout &layout,
                        const OracleBinding &binding, const std::string &slot,
                        const std::set<std::pair<uint64_t, uint64_t>> &f);

/// Full unitary of an oracle gate on (in_bits + out_bits) qubits, input high.
Mat oracle_matrix(const InstrumentedOracle &oracle, uint64_t query_index = 0);

}  // namespace qcp

#endif
