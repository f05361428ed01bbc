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

#include "qcp/cp.h"

namespace qcp {

CpSecretKey cp_setup(unsigned lambda, Rng &rng) {
    if (lambda == 0 || lambda % 2 != 0) {
        throw DimensionError("cp_setup: lambda must be a positive even number, got " + std::to_string(lambda));
    }
    if (lambda > kMaxCpLambda) {
        throw ResourceError("cp_setup: lambda over cap " + std::to_string(kMaxCpLambda));
    }
    F2Subspace a = rand_subspace(lambda, lambda / 2, rng);
    return {a, a.dual()};
}

Circuit cp_evaluator_circuit(uint64_t x, unsigned x_bits, unsigned data_bits, const CpRegisters &regs) {
    unsigned m = data_bits;
    uint64_t valid = uint64_t{1} << m;
    uint64_t width = m + 1;
    Circuit c;
    c.push_back(QueryOp{"O1", {regs.prog}, x, x_bits, regs.y1});
    c.push_back(HadamardOp{regs.prog});
    c.push_back(QueryOp{"O2", {regs.prog}, x, x_bits, regs.y2});
    c.push_back(HadamardOp{regs.prog});
    c.push_back(ClassicalOp{{regs.y1, regs.y2}, regs.out, [=](uint64_t in) -> uint64_t {
                                uint64_t a = in >> width;
                                uint64_t b = in & f2_mask(static_cast<unsigned>(width));
                                if (!(a & valid) || !(b & valid)) {
                                    return 0;
                                }
                                return valid | ((a ^ b) & f2_mask(m));
                            }});
    return c;
}

ProgramSpec cp_program_spec(const CpOracles &oracles, unsigned lambda, uint64_t domain, unsigned data_bits,
                            const std::string &prefix) {
    CpRegisters regs(prefix);
    unsigned x_bits = index_bits(domain);
    ProgramSpec spec;
    spec.program = RegisterLayout({{regs.prog, lambda}});
    spec.ancillas =
        RegisterLayout({{regs.y1, data_bits + 1}, {regs.y2, data_bits + 1}, {regs.out, data_bits + 1}});
    spec.evaluator = [=](uint64_t x) { return cp_evaluator_circuit(x, x_bits, data_bits, regs); };
    spec.output = {regs.out};
    spec.decode = validity_decoder(data_bits);
    spec.oracles = {{"O1", oracles.o1}, {"O2", oracles.o2}};
    return spec;
}

CpProgram::CpProgram(QuantumState state, CpOracles oracles, OraclePtr u_a, OraclePtr u_a_dual, uint64_t domain,
                     unsigned data_bits)
    : state_(std::move(state)),
      oracles_(std::move(oracles)),
      u_a_(std::move(u_a)),
      u_a_dual_(std::move(u_a_dual)),
      domain_(domain),
      data_bits_(data_bits) {}

ProgramSpec CpProgram::spec(const std::string &prefix) const {
    return cp_program_spec(oracles_, lambda(), domain_, data_bits_, prefix);
}

ComputeResult CpProgram::compute(uint64_t x, Rng &rng) {
    return run(x, &rng);
}

ComputeResult CpProgram::compute_postselected(uint64_t x) {
    return run(x, nullptr);
}

ComputeResult CpProgram::run(uint64_t x, Rng *rng) {
    if (x >= domain_) {
        throw std::out_of_range("CpProgram::compute: input outside domain");
    }
    if (!state_.is_pure()) {
        throw std::invalid_argument("CpProgram::compute: program state must be pure");
    }
    CpRegisters regs;
    unsigned m = data_bits_;
    unsigned x_bits = index_bits(domain_);
    RegisterLayout anc({{regs.y1, m + 1}, {regs.y2, m + 1}});
    QuantumState before = state_;
    QuantumState s = tensor(state_, QuantumState::zeros(anc));
    OracleBinding binding{{"O1", oracles_.o1}, {"O2", oracles_.o2}};

    // Projector onto "validity bit set" of a (1 + m)-qubit output register.
    auto dim = static_cast<Eigen::Index>(uint64_t{1} << (m + 1));
    Mat valid = Mat::Zero(dim, dim);
    for (Eigen::Index i = dim / 2; i < dim; i++) {
        valid(i, i) = 1.0;
    }
    auto stage = [&](const std::string &reg, Rng *r) -> std::pair<GentleResult, double> {
        double p = local_expectation(s, {reg}, valid);
        GentleResult g = r != nullptr ? gentle_measure(s, valid, *r, {reg}) : gentle_postselect(s, valid, 0, {reg});
        return {std::move(g), p};
    };
    auto finish = [&](const QuantumState &st, ComputeResult res) {
        state_ = drop_register(drop_register(st, regs.y1), regs.y2);
        res.drift = trace_distance(state_, before);
        return res;
    };

    ComputeResult res{std::nullopt, 0, 0, 0, 0, 0};
    s = run_circuit(Circuit{QueryOp{"O1", {regs.prog}, x, x_bits, regs.y1}}, s, binding);
    auto [g1, p1] = stage(regs.y1, rng);
    res.first_stage_prob = p1;
    s = g1.post;
    if (g1.outcome != 0) {
        res.failed_stage = 1;
        return finish(s, res);
    }
    // The data part is fixed by x once the validity bit is set.
    Rng unused(0);
    MeasureResult m1 = measure_register(s, regs.y1, rng != nullptr ? *rng : unused);
    s = m1.post;

    s = hadamard_all(s, regs.prog);
    s = run_circuit(Circuit{QueryOp{"O2", {regs.prog}, x, x_bits, regs.y2}}, s, binding);
    auto [g2, p2] = stage(regs.y2, rng);
    res.second_stage_prob = p2;
    s = hadamard_all(g2.post, regs.prog);
    if (g2.outcome != 0) {
        res.failed_stage = 2;
        return finish(s, res);
    }
    MeasureResult m2 = measure_register(s, regs.y2, rng != nullptr ? *rng : unused);
    s = m2.post;
    res.success_prob = p1 * p2;
    res.y = (m1.outcome ^ m2.outcome) & f2_mask(m);
    return finish(s, res);
}

CpProgram cp_generate_with_g(const CpSecretKey &sk, const ClassicalFunction &f, const ClassicalFunction &g) {
    if (sk.a.n() > kMaxCpLambda) {
        throw ResourceError("cp_generate: lambda over cap");
    }
    CpOracles oracles = cp_oracles(sk.a, f, g);
    auto u_a = std::make_shared<const InstrumentedOracle>(membership_oracle(sk.a, "U_A", "A"));
    auto u_ad = std::make_shared<const InstrumentedOracle>(membership_oracle(sk.a_dual, "U_Aperp", "Aperp"));
    return CpProgram(prepare_subspace_state(sk.a, CpRegisters().prog), oracles, u_a, u_ad, f.domain(),
                     f.out_bits());
}

CpProgram cp_generate(const CpSecretKey &sk, const ClassicalFunction &f, Rng &rng) {
    ClassicalFunction g = ClassicalFunction::random(f.domain(), f.out_bits(), rng);
    return cp_generate_with_g(sk, f, g);
}

F2Vector sign_token_bit(const QuantumState &subspace_state, int b, Rng &rng) {
    if (b != 0 && b != 1) {
        throw std::invalid_argument("sign_token_bit: bit must be 0 or 1");
    }
    const auto &layout = subspace_state.layout();
    if (layout.registers().size() != 1) {
        throw std::invalid_argument("sign_token_bit: expected a single-register state");
    }
    const std::string &reg = layout.registers().front().name;
    QuantumState s = b == 1 ? hadamard_all(subspace_state, reg) : subspace_state;
    MeasureResult r = measure_register(s, reg, rng);
    return F2Vector(layout.total_qubits(), r.outcome);
}

}  // namespace qcp
