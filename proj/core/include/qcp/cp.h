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

#ifndef QCP_CP_H
#define QCP_CP_H

#include <optional>
#include <string>

#include "qcp/f2.h"
#include "qcp/measure.h"
#include "qcp/oracles.h"
#include "qcp/qsim.h"

namespace qcp {

inline constexpr unsigned kMaxCpLambda = 16;

struct CpSecretKey {
    F2Subspace a;
    F2Subspace a_dual;
};

/// Uniformly random subspace of dimension lambda / 2 in GF(2)^lambda.
CpSecretKey cp_setup(unsigned lambda, Rng &rng);

/// Register names used by the copy-protection evaluator; `prefix` keeps two
/// copies apart inside one joint state.
struct CpRegisters {
    explicit CpRegisters(const std::string &prefix = "")
        : prog(prefix + "prog"), y1(prefix + "y1"), y2(prefix + "y2"), out(prefix + "out") {}
    std::string prog;
    std::string y1;
    std::string y2;
    std::string out;
};

/// U_x as one coherent circuit: O1 query into y1, H on the program, O2 query
/// into y2, H back, then out ^= enc(d1 xor d2) when both answers are valid.
Circuit cp_evaluator_circuit(uint64_t x, unsigned x_bits, unsigned data_bits, const CpRegisters &regs);

/// Evaluator spec of a copy-protected program whose O1/O2 slots are bound to `oracles`.
ProgramSpec cp_program_spec(const CpOracles &oracles, unsigned lambda, uint64_t domain, unsigned data_bits,
                            const std::string &prefix = "");

struct ComputeResult {
    std::optional<uint64_t> y;
    /// 0 on success, 1 or 2 for the stage that returned the invalid symbol.
    int failed_stage;
    double first_stage_prob;
    double second_stage_prob;
    double success_prob;
    /// Trace distance between the program before and after the call.
    double drift;
};

class CpProgram {
   public:
    CpProgram(QuantumState state, CpOracles oracles, OraclePtr u_a, OraclePtr u_a_dual, uint64_t domain,
              unsigned data_bits);

    const QuantumState &state() const { return state_; }
    const CpOracles &oracles() const { return oracles_; }
    const OraclePtr &u_a() const { return u_a_; }
    const OraclePtr &u_a_dual() const { return u_a_dual_; }
    unsigned lambda() const { return state_.layout().total_qubits(); }
    uint64_t domain() const { return domain_; }
    unsigned data_bits() const { return data_bits_; }

    /// One evaluation on input x. Only the oracle output registers are
    /// measured. On the invalid symbol the call stops and the disturbed
    /// program is kept; there is no automatic retry.
    ComputeResult compute(uint64_t x, Rng &rng);

    /// Same evaluation conditioned on both stages succeeding. Returns the
    /// exact stage probabilities and leaves the program in its
    /// success-conditioned state.
    ComputeResult compute_postselected(uint64_t x);

    ProgramSpec spec(const std::string &prefix = "") const;

   private:
    ComputeResult run(uint64_t x, Rng *rng);

    QuantumState state_;
    CpOracles oracles_;
    OraclePtr u_a_;
    OraclePtr u_a_dual_;
    uint64_t domain_;
    unsigned data_bits_;
};

/// Fresh program for f with a newly sampled g.
CpProgram cp_generate(const CpSecretKey &sk, const ClassicalFunction &f, Rng &rng);
/// Program for f with the given g.
CpProgram cp_generate_with_g(const CpSecretKey &sk, const ClassicalFunction &f, const ClassicalFunction &g);

/// Measures |A> (b = 0) or H|A> (b = 1) in the computational basis.
F2Vector sign_token_bit(const QuantumState &subspace_state, int b, Rng &rng);

}  // namespace qcp

#endif
