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

#include "qcp/oracles.h"

#include <algorithm>
#include <iomanip>

namespace qcp {

inline constexpr unsigned kMaxOracleInputBits = 24;

ClassicalFunction::ClassicalFunction(std::vector<uint64_t> table, unsigned out_bits)
    : table_(std::move(table)), out_bits_(out_bits) {
    if (table_.empty()) {
        throw DimensionError("ClassicalFunction: empty domain");
    }
    if (out_bits > 32) {
        throw DimensionError("ClassicalFunction: output width over 32 bits");
    }
    for (uint64_t v : table_) {
        if ((v & ~f2_mask(out_bits)) != 0) {
            throw DimensionError("ClassicalFunction: table value wider than output width");
        }
    }
}

ClassicalFunction ClassicalFunction::random(uint64_t domain, unsigned out_bits, Rng &rng) {
    if (domain == 0 || domain > (uint64_t{1} << kMaxOracleInputBits)) {
        throw DimensionError("ClassicalFunction::random: bad domain size");
    }
    std::vector<uint64_t> table(domain);
    for (auto &v : table) {
        v = rng() & f2_mask(out_bits);
    }
    return ClassicalFunction(std::move(table), out_bits);
}

ClassicalFunction ClassicalFunction::random(uint64_t domain, unsigned out_bits, uint64_t seed) {
    Rng rng(seed);
    return random(domain, out_bits, rng);
}

uint64_t ClassicalFunction::operator()(uint64_t x) const {
    if (x >= table_.size()) {
        throw std::out_of_range("ClassicalFunction: input " + std::to_string(x) + " outside domain");
    }
    return table_[x];
}

ClassicalFunction operator^(const ClassicalFunction &a, const ClassicalFunction &b) {
    if (a.domain() != b.domain() || a.out_bits() != b.out_bits()) {
        throw DimensionError("ClassicalFunction xor: shape mismatch");
    }
    std::vector<uint64_t> t(a.domain());
    for (uint64_t x = 0; x < t.size(); x++) {
        t[x] = a(x) ^ b(x);
    }
    return ClassicalFunction(std::move(t), a.out_bits());
}

// ---------------------------------------------------------------------------

InstrumentedOracle::InstrumentedOracle(std::string id, unsigned in_bits, unsigned data_bits, bool validity,
                                       std::vector<uint64_t> encoded)
    : id_(std::move(id)), in_bits_(in_bits), data_bits_(data_bits), validity_(validity), encoded_(std::move(encoded)) {
    if (in_bits > kMaxOracleInputBits || data_bits > 32) {
        throw DimensionError("InstrumentedOracle: wire widths over cap");
    }
    if (encoded_.size() != (uint64_t{1} << in_bits)) {
        throw DimensionError("InstrumentedOracle: table size does not match input width");
    }
    for (uint64_t e : encoded_) {
        if ((e & ~f2_mask(out_bits())) != 0) {
            throw DimensionError("InstrumentedOracle: encoded answer wider than output");
        }
    }
}

uint64_t InstrumentedOracle::encoded(uint64_t input, uint64_t query_index) const {
    if (input >= encoded_.size()) {
        throw std::out_of_range("InstrumentedOracle: input out of range");
    }
    if (!replaced_.empty() && replaced_.count({query_index, input})) {
        return 0;
    }
    return encoded_[input];
}

std::optional<uint64_t> InstrumentedOracle::answer(uint64_t input, uint64_t query_index) const {
    uint64_t e = encoded(input, query_index);
    if (!validity_) {
        return e;
    }
    if (((e >> data_bits_) & 1) == 0) {
        return std::nullopt;
    }
    return e & f2_mask(data_bits_);
}

void InstrumentedOracle::add_flag_set(const std::string &name, std::vector<bool> members) {
    if (members.size() != encoded_.size()) {
        throw DimensionError("add_flag_set: membership vector does not cover the input space");
    }
    for (const auto &f : flags_) {
        if (f.first == name) {
            throw std::invalid_argument("add_flag_set: duplicate flag set '" + name + "'");
        }
    }
    flags_.emplace_back(name, std::move(members));
}

InstrumentedOracle InstrumentedOracle::with_replaced(const std::set<std::pair<uint64_t, uint64_t>> &replaced) const {
    InstrumentedOracle out = *this;
    out.replaced_.insert(replaced.begin(), replaced.end());
    return out;
}

InstrumentedOracle classical_gate(const ClassicalFunction &f, const std::string &id) {
    unsigned in_bits = f.in_bits();
    std::vector<uint64_t> enc(uint64_t{1} << in_bits, 0);
    for (uint64_t x = 0; x < f.domain(); x++) {
        enc[x] = f(x);
    }
    return InstrumentedOracle(id, in_bits, f.out_bits(), false, std::move(enc));
}

InstrumentedOracle membership_oracle(const F2Subspace &s, const std::string &id, const std::string &flag_name) {
    if (s.n() > kMaxOracleInputBits) {
        throw DimensionError("membership_oracle: ambient dimension over cap");
    }
    uint64_t size = uint64_t{1} << s.n();
    std::vector<uint64_t> enc(size, 0);
    std::vector<bool> flag(size, false);
    for (uint64_t v = 1; v < size; v++) {
        if (s.contains(v)) {
            enc[v] = 1;
            flag[v] = true;
        }
    }
    InstrumentedOracle o(id, s.n(), 1, false, std::move(enc));
    o.add_flag_set(flag_name, std::move(flag));
    return o;
}

InstrumentedOracle subspace_gated_oracle(const std::string &id, const F2Subspace &a, const F2Subspace &valid_on,
                                         const ClassicalFunction &payload) {
    unsigned n = a.n();
    unsigned xb = payload.in_bits();
    unsigned m = payload.out_bits();
    if (valid_on.n() != n) {
        throw DimensionError("subspace_gated_oracle: subspace ambient mismatch");
    }
    if (n + xb > kMaxOracleInputBits) {
        throw DimensionError("subspace_gated_oracle: input width over cap");
    }
    F2Subspace ad = a.dual();
    uint64_t size = uint64_t{1} << (n + xb);
    std::vector<uint64_t> enc(size, 0);
    std::vector<bool> in_a(size, false);
    std::vector<bool> in_ad(size, false);
    for (uint64_t in = 0; in < size; in++) {
        uint64_t x = in >> n;
        uint64_t v = in & f2_mask(n);
        if (v == 0) {
            continue;
        }
        in_a[in] = a.contains(v);
        in_ad[in] = ad.contains(v);
        if (x < payload.domain() && valid_on.contains(v)) {
            enc[in] = (uint64_t{1} << m) | payload(x);
        }
    }
    InstrumentedOracle o(id, n + xb, m, true, std::move(enc));
    o.add_flag_set("A", std::move(in_a));
    o.add_flag_set("Aperp", std::move(in_ad));
    return o;
}

CpOracles cp_oracles(const F2Subspace &a, const ClassicalFunction &f, const ClassicalFunction &g) {
    ClassicalFunction fg = f ^ g;
    return {std::make_shared<const InstrumentedOracle>(subspace_gated_oracle("O1", a, a, fg)),
            std::make_shared<const InstrumentedOracle>(subspace_gated_oracle("O2", a, a.dual(), g))};
}

CpOracles swapped_cp_oracles(const F2Subspace &a, const ClassicalFunction &f, const ClassicalFunction &g) {
    ClassicalFunction fg = f ^ g;
    return {std::make_shared<const InstrumentedOracle>(subspace_gated_oracle("O1'", a, a, g)),
            std::make_shared<const InstrumentedOracle>(subspace_gated_oracle("O2'", a, a.dual(), fg))};
}

InstrumentedOracle bot_oracle(unsigned in_bits, unsigned data_bits, const std::string &id) {
    return InstrumentedOracle(id, in_bits, data_bits, true, std::vector<uint64_t>(uint64_t{1} << in_bits, 0));
}

InstrumentedOracle bot_oracle(const InstrumentedOracle &like, const std::string &id) {
    InstrumentedOracle o(id, like.in_bits(), like.data_bits(), like.has_validity(),
                         std::vector<uint64_t>(like.table().size(), 0));
    for (const auto &[name, members] : like.flag_sets()) {
        o.add_flag_set(name, members);
    }
    return o;
}

InstrumentedOracle bbbv_modify(const InstrumentedOracle &oracle, const std::set<std::pair<uint64_t, uint64_t>> &f) {
    return oracle.with_replaced(f);
}

// ---------------------------------------------------------------------------

size_t count_queries(const Circuit &circuit, const std::string &slot) {
    size_t count = 0;
    for (const auto &op : circuit) {
        if (const auto *q = std::get_if<QueryOp>(&op); q != nullptr && q->slot == slot) {
            count++;
        }
    }
    return count;
}

double query_weight(const Transcript &t, const std::string &flag_set, const std::string &slot) {
    double total = 0;
    bool seen = false;
    for (const auto &r : t.records) {
        if (!slot.empty() && r.slot != slot) {
            continue;
        }
        auto it = r.weights.find(flag_set);
        if (it == r.weights.end()) {
            continue;
        }
        seen = true;
        total += it->second;
    }
    if (!seen && !t.records.empty()) {
        throw std::invalid_argument("query_weight: no record carries flag set '" + flag_set + "'");
    }
    return total;
}

void write_transcript_csv(std::ostream &out, const Transcript &t, uint64_t trial, bool header) {
    if (header) {
        out << "trial,oracle,query_index,flag_set,weight\n";
    }
    for (const auto &r : t.records) {
        for (const auto &[name, w] : r.weights) {
            out << trial << ',' << r.slot << ',' << r.query_index << ',' << name << ',' << std::setprecision(17) << w
                << '\n';
        }
    }
}

namespace {

struct Field {
    unsigned shift;
    unsigned width;
};

std::vector<Field> fields_of(const RegisterLayout &layout, const std::vector<std::string> &regs) {
    std::vector<Field> out;
    for (const auto &r : regs) {
        out.push_back({layout.shift(r), layout.width(r)});
    }
    return out;
}

uint64_t pack(uint64_t index, const std::vector<Field> &fields) {
    uint64_t v = 0;
    for (const auto &f : fields) {
        v = (v << f.width) | ((index >> f.shift) & f2_mask(f.width));
    }
    return v;
}

uint64_t unpack_into(uint64_t index, uint64_t packed, const std::vector<Field> &fields) {
    for (auto it = fields.rbegin(); it != fields.rend(); ++it) {
        uint64_t mask = f2_mask(it->width) << it->shift;
        index = (index & ~mask) | ((packed & f2_mask(it->width)) << it->shift);
        packed >>= it->width;
    }
    return index;
}

unsigned total_width(const std::vector<Field> &fields) {
    unsigned w = 0;
    for (const auto &f : fields) {
        w += f.width;
    }
    return w;
}

void apply_basis_map(Vec &psi, const std::function<uint64_t(uint64_t)> &map) {
    // Moves only the nonzero amplitudes; states here are mostly sparse.
    thread_local std::vector<std::pair<Eigen::Index, Complex>> moved;
    moved.clear();
    for (Eigen::Index i = 0; i < psi.size(); i++) {
        if (psi[i] == Complex(0)) {
            continue;
        }
        moved.emplace_back(static_cast<Eigen::Index>(map(static_cast<uint64_t>(i))), psi[i]);
        psi[i] = 0;
    }
    for (const auto &[j, a] : moved) {
        psi[j] += a;
    }
}

}  // namespace

RunResult run_circuit(const Circuit &circuit, Vec &psi, const RegisterLayout &layout, const OracleBinding &binding,
                      Transcript *transcript, const RunOptions &options) {
    if (static_cast<uint64_t>(psi.size()) != layout.dim()) {
        throw DimensionError("run_circuit: state size does not match layout");
    }
    RunResult result;
    for (const auto &op : circuit) {
        if (const auto *h = std::get_if<HadamardOp>(&op)) {
            hadamard_all_inplace(psi, layout, h->reg);
        } else if (const auto *x = std::get_if<XorConstOp>(&op)) {
            uint64_t flip = (x->value & f2_mask(layout.width(x->reg))) << layout.shift(x->reg);
            apply_basis_map(psi, [&](uint64_t i) { return i ^ flip; });
        } else if (const auto *u = std::get_if<UnitaryOp>(&op)) {
            psi = apply_local(psi, layout, u->regs, u->u);
        } else if (const auto *c = std::get_if<ClassicalOp>(&op)) {
            if (std::find(c->inputs.begin(), c->inputs.end(), c->output) != c->inputs.end()) {
                throw std::invalid_argument("run_circuit: classical op writes into one of its inputs");
            }
            auto in = fields_of(layout, c->inputs);
            unsigned os = layout.shift(c->output);
            uint64_t om = f2_mask(layout.width(c->output));
            apply_basis_map(psi, [&](uint64_t i) { return i ^ ((c->fn(pack(i, in)) & om) << os); });
        } else if (const auto *p = std::get_if<PermuteOp>(&op)) {
            auto regs = fields_of(layout, p->regs);
            uint64_t mask = f2_mask(total_width(regs));
            apply_basis_map(psi, [&](uint64_t i) { return unpack_into(i, p->perm(pack(i, regs)) & mask, regs); });
        } else if (const auto *q = std::get_if<QueryOp>(&op)) {
            auto it = binding.find(q->slot);
            if (it == binding.end() || !it->second) {
                throw std::invalid_argument("run_circuit: no oracle bound to slot '" + q->slot + "'");
            }
            const InstrumentedOracle &oracle = *it->second;
            auto in = fields_of(layout, q->inputs);
            unsigned in_width = total_width(in);
            if (in_width + q->prefix_bits != oracle.in_bits() || layout.width(q->output) != oracle.out_bits()) {
                throw DimensionError("run_circuit: wires of query to '" + q->slot + "' do not match oracle widths");
            }
            uint64_t index = result.queries[q->slot];
            if (options.halt_before && options.halt_before->first == q->slot && options.halt_before->second == index) {
                result.halted = true;
                return result;
            }
            uint64_t prefix = q->prefix << in_width;
            unsigned os = layout.shift(q->output);
            if (transcript != nullptr) {
                QueryRecord rec{q->slot, oracle.id(), index, {}, {}};
                std::vector<double> marginal(uint64_t{1} << oracle.in_bits(), 0.0);
                for (Eigen::Index i = 0; i < psi.size(); i++) {
                    double w = std::norm(psi[i]);
                    if (w != 0) {
                        marginal[prefix | pack(static_cast<uint64_t>(i), in)] += w;
                    }
                }
                for (const auto &[name, members] : oracle.flag_sets()) {
                    double w = 0;
                    for (uint64_t v = 0; v < marginal.size(); v++) {
                        if (members[v]) {
                            w += marginal[v];
                        }
                    }
                    rec.weights[name] = w;
                }
                if (transcript->record_marginals) {
                    rec.input_marginal = std::move(marginal);
                }
                transcript->records.push_back(std::move(rec));
            }
            apply_basis_map(psi, [&](uint64_t i) {
                return i ^ (oracle.encoded(prefix | pack(i, in), index) << os);
            });
            result.queries[q->slot]++;
        }
        result.ops_applied++;
    }
    return result;
}

Circuit invert_circuit(const Circuit &circuit, const RegisterLayout &layout, size_t prefix) {
    size_t n = std::min(prefix, circuit.size());
    Circuit out;
    for (size_t k = n; k-- > 0;) {
        const Op &op = circuit[k];
        if (const auto *u = std::get_if<UnitaryOp>(&op)) {
            out.push_back(UnitaryOp{u->regs, u->u.adjoint()});
        } else if (const auto *p = std::get_if<PermuteOp>(&op)) {
            unsigned w = 0;
            for (const auto &r : p->regs) {
                w += layout.width(r);
            }
            if (w > 24) {
                throw ResourceError("invert_circuit: permutation over 24 bits");
            }
            auto inv = std::make_shared<std::vector<uint64_t>>(uint64_t{1} << w);
            for (uint64_t v = 0; v < inv->size(); v++) {
                (*inv)[p->perm(v) & f2_mask(w)] = v;
            }
            out.push_back(PermuteOp{p->regs, [inv](uint64_t v) { return (*inv)[v]; }});
        } else {
            // Hadamards, XORs, classical ops and queries are involutions.
            out.push_back(op);
        }
    }
    return out;
}

QuantumState run_circuit(const Circuit &circuit, const QuantumState &state, const OracleBinding &binding,
                         Transcript *transcript) {
    Vec v = state.vector();
    run_circuit(circuit, v, state.layout(), binding, transcript);
    return QuantumState::pure(state.layout(), v / v.norm());
}

BbbvReport bbbv_compare(const Circuit &circuit, const Vec &psi, const RegisterLayout &layout,
                        const OracleBinding &binding, const std::string &slot,
                        const std::set<std::pair<uint64_t, uint64_t>> &f) {
    auto it = binding.find(slot);
    if (it == binding.end()) {
        throw std::invalid_argument("bbbv_compare: unknown slot '" + slot + "'");
    }
    Transcript t;
    t.record_marginals = true;
    Vec original = psi;
    run_circuit(circuit, original, layout, binding, &t);
    double weight = 0;
    for (const auto &r : t.records) {
        if (r.slot != slot) {
            continue;
        }
        for (uint64_t y = 0; y < r.input_marginal.size(); y++) {
            if (f.count({r.query_index, y})) {
                weight += r.input_marginal[y];
            }
        }
    }
    OracleBinding modified = binding;
    modified[slot] = std::make_shared<const InstrumentedOracle>(bbbv_modify(*it->second, f));
    Vec changed = psi;
    run_circuit(circuit, changed, layout, modified);
    // sqrt(1 - |<a|b>|^2) as the norm of the component of b orthogonal to a.
    Vec a = original.normalized();
    Vec b = changed.normalized();
    double distance = (b - a * a.dot(b)).norm();
    uint64_t queries = count_queries(circuit, slot);
    double bound = std::sqrt(static_cast<double>(queries) * weight);
    double hybrid = 2.0 * bound;
    if (distance > hybrid + 1e-9) {
        throw InvariantViolation("BBBV bound violated: distance " + std::to_string(distance) + " > " +
                                 std::to_string(hybrid));
    }
    return {distance, queries, weight, bound, hybrid};
}

Mat oracle_matrix(const InstrumentedOracle &oracle, uint64_t query_index) {
    unsigned total = oracle.in_bits() + oracle.out_bits();
    if (total > 12) {
        throw ResourceError("oracle_matrix: gate over 12 qubits");
    }
    auto dim = static_cast<Eigen::Index>(uint64_t{1} << total);
    Mat m = Mat::Zero(dim, dim);
    for (uint64_t i = 0; i < static_cast<uint64_t>(dim); i++) {
        uint64_t in = i >> oracle.out_bits();
        uint64_t j = i ^ oracle.encoded(in, query_index);
        m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = 1.0;
    }
    return m;
}

}  // namespace qcp
