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

#include "qcp/measure.h"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>

namespace qcp {

std::function<Decoded(uint64_t)> validity_decoder(unsigned data_bits) {
    return [data_bits](uint64_t raw) -> Decoded {
        if (((raw >> data_bits) & 1) == 0) {
            return std::nullopt;
        }
        return raw & f2_mask(data_bits);
    };
}

ProgramSpec ProgramSpec::rebound(const OracleBinding &overrides) const {
    ProgramSpec out = *this;
    for (const auto &[slot, oracle] : overrides) {
        out.oracles[slot] = oracle;
    }
    return out;
}

ProgramSpec table_program_spec(const std::vector<std::vector<Decoded>> &tables, uint64_t domain, unsigned data_bits,
                               const std::string &prefix) {
    if (tables.empty()) {
        throw std::invalid_argument("table_program_spec: no tables");
    }
    for (const auto &t : tables) {
        if (t.size() != domain) {
            throw DimensionError("table_program_spec: table size differs from domain");
        }
    }
    unsigned pb = std::max(1u, index_bits(tables.size()));
    ProgramSpec spec;
    std::string prog = prefix + "prog";
    std::string out = prefix + "out";
    spec.program = RegisterLayout({{prog, pb}});
    spec.ancillas = RegisterLayout({{out, data_bits + 1}});
    auto shared = std::make_shared<const std::vector<std::vector<Decoded>>>(tables);
    spec.evaluator = [=](uint64_t x) {
        if (x >= domain) {
            throw std::out_of_range("table program: input outside domain");
        }
        return Circuit{ClassicalOp{{prog}, out, [=](uint64_t j) -> uint64_t {
                                       if (j >= shared->size() || !(*shared)[j][x]) {
                                           return 0;
                                       }
                                       return (uint64_t{1} << data_bits) | *(*shared)[j][x];
                                   }}};
    };
    spec.output = {out};
    spec.decode = validity_decoder(data_bits);
    return spec;
}

std::vector<Decoded> answer_table(const ClassicalFunction &f) {
    return {f.table().begin(), f.table().end()};
}

namespace {

uint64_t pack_output(uint64_t index, const RegisterLayout &layout, const std::vector<std::string> &regs) {
    uint64_t v = 0;
    for (const auto &r : regs) {
        v = (v << layout.width(r)) | layout.value_of(index, r);
    }
    return v;
}

unsigned output_width(const RegisterLayout &layout, const std::vector<std::string> &regs) {
    unsigned w = 0;
    for (const auto &r : regs) {
        w += layout.width(r);
    }
    return w;
}

// Output value -> decoded answer for every basis index of the system.
std::vector<Decoded> decode_table(const ProgramSpec &spec, const RegisterLayout &sys) {
    unsigned w = output_width(sys, spec.output);
    if (w > 24) {
        throw ResourceError("program output wider than 24 bits");
    }
    std::vector<Decoded> by_raw(uint64_t{1} << w);
    for (uint64_t raw = 0; raw < by_raw.size(); raw++) {
        by_raw[raw] = spec.decode(raw);
    }
    std::vector<Decoded> out(sys.dim());
    for (uint64_t i = 0; i < sys.dim(); i++) {
        out[i] = by_raw[pack_output(i, sys, spec.output)];
    }
    return out;
}

void check_spec(const ProgramSpec &spec) {
    if (!spec.evaluator || !spec.decode) {
        throw std::invalid_argument("ProgramSpec: missing evaluator or decoder");
    }
    if (spec.program.total_qubits() > kMaxMixedQubits) {
        throw ResourceError("ProgramSpec: program register over " + std::to_string(kMaxMixedQubits) + " qubits");
    }
    if (spec.system().total_qubits() > kMaxPureQubits) {
        throw ResourceError("ProgramSpec: program plus ancillas over " + std::to_string(kMaxPureQubits) + " qubits");
    }
}

}  // namespace

std::vector<std::pair<Decoded, double>> evaluate_distribution(const QuantumState &program_state,
                                                              const ProgramSpec &spec, uint64_t x) {
    check_spec(spec);
    if (!(program_state.layout() == spec.program)) {
        throw DimensionError("evaluate_distribution: state layout differs from program layout");
    }
    RegisterLayout sys = spec.system();
    QuantumState full = tensor(program_state, QuantumState::zeros(spec.ancillas));
    if (!full.is_pure()) {
        throw std::invalid_argument("evaluate_distribution: purify mixed programs first");
    }
    Vec psi = full.vector();
    run_circuit(spec.evaluator(x), psi, sys, spec.oracles);
    auto decoded = decode_table(spec, sys);
    std::map<Decoded, double> acc;
    for (uint64_t i = 0; i < sys.dim(); i++) {
        double w = std::norm(psi[static_cast<Eigen::Index>(i)]);
        if (w > 0) {
            acc[decoded[i]] += w;
        }
    }
    return {acc.begin(), acc.end()};
}

// ---------------------------------------------------------------------------

BinaryPovm::BinaryPovm(Mat p) : p_(std::move(p)) {
    if (!is_hermitian(p_)) {
        throw std::invalid_argument("BinaryPovm: operator is not Hermitian");
    }
    p_ = (p_ + p_.adjoint()) / 2.0;
    auto ev = hermitian_eigenvalues(p_);
    if (ev.size() > 0 && (ev.minCoeff() < -kPsdTol || ev.maxCoeff() > 1 + kPsdTol)) {
        throw std::invalid_argument("BinaryPovm: eigenvalues outside [0, 1]");
    }
}

Mat ProjectiveImplementation::reconstruct() const {
    Mat out = Mat::Zero(dim(), dim());
    for (size_t i = 0; i < values.size(); i++) {
        out += values[i] * projectors[i];
    }
    return out;
}

ProjectiveImplementation proj_impl(const BinaryPovm &povm, double merge_tol) {
    Eigen::SelfAdjointEigenSolver<Mat> es(povm.p());
    const auto &ev = es.eigenvalues();
    const auto &vecs = es.eigenvectors();
    ProjectiveImplementation pi;
    // Eigenvalues come ascending; walk downward and merge close neighbours.
    Eigen::Index k = ev.size() - 1;
    while (k >= 0) {
        Eigen::Index start = k;
        while (k - 1 >= 0 && ev[start] - ev[k - 1] <= merge_tol) {
            k--;
        }
        Eigen::Index lo = k;
        Mat block = vecs.middleCols(lo, start - lo + 1);
        double mean = ev.segment(lo, start - lo + 1).mean();
        pi.values.push_back(std::clamp(mean, 0.0, 1.0));
        pi.projectors.push_back(block * block.adjoint());
        k--;
    }
    return pi;
}

namespace {

// (op (x) I) applied to a pure or mixed state, unnormalized, with its weight.
struct Projected {
    std::variant<Vec, Mat> data;
    double weight;
};

Projected project(const QuantumState &state, const std::vector<std::string> &regs, const Mat &op) {
    if (state.is_pure()) {
        Vec v = apply_local(state.vector(), state.layout(), regs, op);
        double w = v.squaredNorm();
        return {std::move(v), w};
    }
    Mat m = apply_local(state.matrix(), state.layout(), regs, op);
    double w = m.trace().real();
    return {std::move(m), w};
}

QuantumState normalized(const RegisterLayout &layout, const Projected &p) {
    if (const Vec *v = std::get_if<Vec>(&p.data)) {
        return QuantumState::pure(layout, *v / std::sqrt(p.weight));
    }
    Mat m = std::get<Mat>(p.data) / p.weight;
    return QuantumState::mixed_trusted(layout, std::move(m));
}

std::vector<std::string> regs_or_all(const QuantumState &state, const std::vector<std::string> &regs) {
    return regs.empty() ? state.layout().names() : regs;
}

}  // namespace

ProjImpOutcome apply_proj_impl(const ProjectiveImplementation &pi, const QuantumState &state, Rng &rng,
                               const std::vector<std::string> &regs_in) {
    auto regs = regs_or_all(state, regs_in);
    std::vector<double> weights;
    weights.reserve(pi.projectors.size());
    for (const auto &proj : pi.projectors) {
        weights.push_back(std::max(0.0, local_expectation(state, regs, proj)));
    }
    size_t k = sample_index(rng, weights);
    Projected part = project(state, regs, pi.projectors[k]);
    return {pi.values[k], k, normalized(state.layout(), part), part.weight};
}

Mat threshold_impl(const ProjectiveImplementation &pi, double gamma) {
    if (gamma < 0 || gamma > 1 + 1e-6) {
        throw std::invalid_argument("threshold_impl: gamma outside [0, 1]");
    }
    Mat out = Mat::Zero(pi.dim(), pi.dim());
    for (size_t i = 0; i < pi.values.size(); i++) {
        if (pi.values[i] >= gamma - 1e-9) {
            out += pi.projectors[i];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

std::vector<double> uniform_distribution(uint64_t n) {
    return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

Predicate equality_predicate(const ClassicalFunction &f, const std::vector<double> &d) {
    if (d.size() != f.domain()) {
        throw DimensionError("equality_predicate: distribution size differs from domain");
    }
    return {d, [](size_t r) { return static_cast<uint64_t>(r); },
            [f](size_t r, const Decoded &y) { return y.has_value() && *y == f(r); }};
}

Mat program_operator(const ProgramSpec &spec, uint64_t x, const std::function<bool(const Decoded &)> &accept) {
    check_spec(spec);
    RegisterLayout sys = spec.system();
    unsigned anc = spec.ancillas.total_qubits();
    auto decoded = decode_table(spec, sys);
    std::vector<Eigen::Index> rows;
    for (uint64_t i = 0; i < sys.dim(); i++) {
        if (accept(decoded[i])) {
            rows.push_back(static_cast<Eigen::Index>(i));
        }
    }
    auto pd = static_cast<Eigen::Index>(spec.program.dim());
    Mat phi(static_cast<Eigen::Index>(rows.size()), pd);
    Circuit c = spec.evaluator(x);
    Vec psi;
    for (Eigen::Index j = 0; j < pd; j++) {
        psi = Vec::Zero(static_cast<Eigen::Index>(sys.dim()));
        psi[j << anc] = 1.0;
        run_circuit(c, psi, sys, spec.oracles);
        for (size_t k = 0; k < rows.size(); k++) {
            phi(static_cast<Eigen::Index>(k), j) = psi[rows[k]];
        }
    }
    Mat p = phi.adjoint() * phi;
    return (p + p.adjoint()) / 2.0;
}

BinaryPovm goodness_povm_predicate(const ProgramSpec &spec, const Predicate &e) {
    auto pd = static_cast<Eigen::Index>(spec.program.dim());
    Mat acc = Mat::Zero(pd, pd);
    for (size_t r = 0; r < e.probs.size(); r++) {
        if (e.probs[r] == 0) {
            continue;
        }
        acc += e.probs[r] * program_operator(spec, e.input(r), [&](const Decoded &y) { return e.accept(r, y); });
    }
    return BinaryPovm(acc);
}

BinaryPovm goodness_povm(const ProgramSpec &spec, const ClassicalFunction &f, const std::vector<double> &d) {
    return goodness_povm_predicate(spec, equality_predicate(f, d));
}

// ---------------------------------------------------------------------------

BinaryPovm ControlledProjection::mixture() const {
    Mat acc = Mat::Zero(embed.cols(), embed.cols());
    for (size_t r = 0; r < family.size(); r++) {
        acc += coin_probs[r] * (embed.adjoint() * family[r] * embed);
    }
    return BinaryPovm(acc);
}

Mat ControlledProjection::control_projector() const {
    Eigen::Index sd = embed.rows();
    Eigen::Index coins = Eigen::Index{1} << coin_qubits();
    Mat out = Mat::Zero(coins * sd, coins * sd);
    for (size_t r = 0; r < family.size(); r++) {
        auto k = static_cast<Eigen::Index>(r);
        out.block(k * sd, k * sd, sd, sd) = family[r];
    }
    return out;
}

Vec ControlledProjection::coin_state() const {
    Vec c = Vec::Zero(Eigen::Index{1} << coin_qubits());
    for (size_t r = 0; r < coin_probs.size(); r++) {
        c[static_cast<Eigen::Index>(r)] = std::sqrt(coin_probs[r]);
    }
    return c;
}

namespace {

void check_coin_space(const std::vector<double> &probs, Eigen::Index system_dim) {
    if (probs.empty()) {
        throw std::invalid_argument("controlled_projection: empty coin space");
    }
    double total = 0;
    for (double p : probs) {
        if (p < 0) {
            throw std::invalid_argument("controlled_projection: negative coin probability");
        }
        total += p;
    }
    if (std::abs(total - 1) > 1e-9) {
        throw std::invalid_argument("controlled_projection: coin probabilities do not sum to 1");
    }
    uint64_t coins = uint64_t{1} << index_bits(probs.size());
    if (coins * static_cast<uint64_t>(system_dim) > (uint64_t{1} << kMaxControlledQubits)) {
        throw ResourceError("controlled_projection: coin space times system over cap");
    }
}

}  // namespace

ControlledProjection controlled_projection(std::vector<Mat> family, std::vector<double> coin_probs) {
    if (family.size() != coin_probs.size() || family.empty()) {
        throw std::invalid_argument("controlled_projection: family and coin sizes differ");
    }
    Eigen::Index d = family.front().rows();
    check_coin_space(coin_probs, d);
    for (const auto &p : family) {
        if (p.rows() != d || !is_projector(p)) {
            throw std::invalid_argument("controlled_projection: family member is not a projector of matching size");
        }
    }
    return {std::move(coin_probs), std::move(family), Mat::Identity(d, d)};
}

ControlledProjection controlled_projection(const ProgramSpec &spec, const Predicate &e) {
    check_spec(spec);
    RegisterLayout sys = spec.system();
    auto sd = static_cast<Eigen::Index>(sys.dim());
    check_coin_space(e.probs, sd);
    unsigned anc = spec.ancillas.total_qubits();
    auto decoded = decode_table(spec, sys);
    ControlledProjection cp;
    cp.coin_probs = e.probs;
    cp.embed = Mat::Zero(sd, static_cast<Eigen::Index>(spec.program.dim()));
    for (Eigen::Index j = 0; j < cp.embed.cols(); j++) {
        cp.embed(j << anc, j) = 1.0;
    }
    for (size_t r = 0; r < e.probs.size(); r++) {
        Circuit c = spec.evaluator(e.input(r));
        Mat u(sd, sd);
        for (Eigen::Index j = 0; j < sd; j++) {
            Vec psi = Vec::Zero(sd);
            psi[j] = 1.0;
            run_circuit(c, psi, sys, spec.oracles);
            u.col(j) = psi;
        }
        Mat v = Mat::Zero(sd, sd);
        for (Eigen::Index i = 0; i < sd; i++) {
            if (e.accept(r, decoded[static_cast<uint64_t>(i)])) {
                v(i, i) = 1.0;
            }
        }
        Mat p = u.adjoint() * v * u;
        cp.family.push_back((p + p.adjoint()) / 2.0);
    }
    return cp;
}

int measure_controlled(const ControlledProjection &cp, const QuantumState &program_state, Rng &rng) {
    Vec sys = cp.embed * program_state.vector();
    Vec coin = cp.coin_state();
    Vec joint(coin.size() * sys.size());
    for (Eigen::Index r = 0; r < coin.size(); r++) {
        joint.segment(r * sys.size(), sys.size()) = coin[r] * sys;
    }
    double accept = (cp.control_projector() * joint).squaredNorm();
    return uniform01(rng) < accept ? 0 : 1;
}

// ---------------------------------------------------------------------------

ScalarDistribution ScalarDistribution::empirical(const std::vector<double> &samples) {
    std::map<double, double> counts;
    for (double s : samples) {
        counts[s] += 1;
    }
    ScalarDistribution d;
    for (const auto &[v, c] : counts) {
        d.values.push_back(v);
        d.probs.push_back(c / static_cast<double>(samples.size()));
    }
    return d;
}

namespace {

double cdf(const ScalarDistribution &d, double x) {
    double acc = 0;
    for (size_t i = 0; i < d.values.size(); i++) {
        if (d.values[i] <= x + 1e-12) {
            acc += d.probs[i];
        }
    }
    return acc;
}

double one_sided_shift(const ScalarDistribution &a, const ScalarDistribution &b, double eps) {
    // sup_x F_a(x) - F_b(x + eps) is attained at a support point of a.
    double worst = 0;
    for (double v : a.values) {
        worst = std::max(worst, cdf(a, v) - cdf(b, v + eps));
    }
    return worst;
}

}  // namespace

double shift_distance(const ScalarDistribution &d0, const ScalarDistribution &d1, double eps) {
    if (eps < 0) {
        throw std::invalid_argument("shift_distance: negative eps");
    }
    double d = std::max(one_sided_shift(d0, d1, eps), one_sided_shift(d1, d0, eps));
    return d < 1e-12 ? 0.0 : std::min(d, 1.0);
}

// ---------------------------------------------------------------------------

uint64_t api_rounds(double eps, double delta, double c) {
    if (!(eps > 0) || !(delta > 0) || delta >= 1) {
        throw std::invalid_argument("api_rounds: need eps > 0 and 0 < delta < 1");
    }
    return static_cast<uint64_t>(std::ceil(c * std::log(2.0 / delta) / (eps * eps)));
}

namespace {

// Pure component of `state` drawn from its eigen-decomposition (identity for pure input).
QuantumState sample_pure_component(const QuantumState &state, Rng &rng) {
    if (state.is_pure()) {
        return state;
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(state.matrix());
    std::vector<double> w(static_cast<size_t>(es.eigenvalues().size()));
    for (size_t i = 0; i < w.size(); i++) {
        w[i] = std::max(0.0, es.eigenvalues()[static_cast<Eigen::Index>(i)]);
    }
    size_t k = sample_index(rng, w);
    Vec v = es.eigenvectors().col(static_cast<Eigen::Index>(k));
    return QuantumState::pure(state.layout(), v / v.norm());
}

// Label walk of the alternating estimator inside one block of eigenvalue p.
// Each step keeps the label with probability p.
struct Walk {
    uint64_t agree = 0;
    uint64_t disagree = 0;
    uint64_t restore = 0;
    bool restored = true;
};

Walk simulate_walk(double p, uint64_t t, uint64_t max_restore, Rng &rng) {
    Walk w;
    int label = 0;
    bool init_family = true;
    auto step = [&] {
        if (uniform01(rng) < p) {
            w.agree++;
        } else {
            w.disagree++;
            label ^= 1;
        }
        init_family = !init_family;
    };
    for (uint64_t i = 0; i < t; i++) {
        step();
    }
    while (!(init_family && label == 0)) {
        if (w.restore >= max_restore) {
            w.restored = false;
            break;
        }
        step();
        w.restore++;
    }
    return w;
}

ApiResult api_fresh_coin(const QuantumState &state, const std::vector<std::string> &regs,
                         const ControlledProjection &cp, uint64_t t, Rng &rng) {
    // Kraus pair (sqrt(P_r), sqrt(I - P_r)) for each coin's program-level operator.
    std::vector<std::pair<Mat, Mat>> kraus;
    for (const auto &p_sys : cp.family) {
        Mat p = cp.embed.adjoint() * p_sys * cp.embed;
        p = (p + p.adjoint()) / 2.0;
        Eigen::SelfAdjointEigenSolver<Mat> es(p);
        Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseMin(1.0);
        Mat u = es.eigenvectors();
        kraus.emplace_back(u * ev.cwiseSqrt().cast<Complex>().asDiagonal() * u.adjoint(),
                           u * (Eigen::VectorXd::Ones(ev.size()) - ev).cwiseSqrt().cast<Complex>().asDiagonal() *
                               u.adjoint());
    }
    QuantumState cur = sample_pure_component(state, rng);
    uint64_t accepts = 0;
    for (uint64_t i = 0; i < t; i++) {
        size_t r = sample_index(rng, cp.coin_probs);
        Vec yes = apply_local(cur.vector(), cur.layout(), regs, kraus[r].first);
        double pa = yes.squaredNorm();
        if (uniform01(rng) < pa) {
            accepts++;
            cur = QuantumState::pure(cur.layout(), yes / std::sqrt(pa));
        } else {
            Vec no = apply_local(cur.vector(), cur.layout(), regs, kraus[r].second);
            cur = QuantumState::pure(cur.layout(), no / no.norm());
        }
    }
    return {static_cast<double>(accepts) / static_cast<double>(t), cur, t, 0, true};
}

ApiResult api_explicit(const QuantumState &state, const std::vector<std::string> &regs,
                       const ControlledProjection &cp, uint64_t t, uint64_t max_restore, Rng &rng) {
    if (!(state.layout().names() == regs)) {
        throw std::invalid_argument("sampled_api explicit backend: state must consist of exactly the measured registers");
    }
    QuantumState pure = sample_pure_component(state, rng);
    Mat cproj = cp.control_projector();
    Vec coin = cp.coin_state();
    Mat init = Mat::Zero(cproj.rows(), cproj.cols());
    {
        Mat ee = cp.embed * cp.embed.adjoint();
        Mat cc = coin * coin.adjoint();
        Eigen::Index sd = ee.rows();
        for (Eigen::Index a = 0; a < cc.rows(); a++) {
            for (Eigen::Index b = 0; b < cc.cols(); b++) {
                init.block(a * sd, b * sd, sd, sd) = cc(a, b) * ee;
            }
        }
    }
    Vec sys = cp.embed * pure.vector();
    Vec cur(coin.size() * sys.size());
    for (Eigen::Index r = 0; r < coin.size(); r++) {
        cur.segment(r * sys.size(), sys.size()) = coin[r] * sys;
    }
    int label = 0;
    bool init_family = true;
    uint64_t agree = 0;
    auto step = [&] {
        const Mat &proj = init_family ? cproj : init;
        Vec in = proj * cur;
        double p_in = in.squaredNorm();
        int outcome = uniform01(rng) < p_in ? 0 : 1;
        if (outcome == 0) {
            cur = in / std::sqrt(p_in);
        } else {
            Vec out = cur - in;
            cur = out / out.norm();
        }
        if (outcome == label) {
            agree++;
        }
        label = outcome;
        init_family = !init_family;
    };
    for (uint64_t i = 0; i < t; i++) {
        step();
    }
    uint64_t restore = 0;
    bool restored = true;
    while (!(init_family && label == 0)) {
        if (restore >= max_restore) {
            restored = false;
            break;
        }
        step();
        restore++;
    }
    QuantumState post = pure;
    if (restored) {
        // Undo the coin and ancilla embedding.
        Vec sys_part = Vec::Zero(sys.size());
        for (Eigen::Index r = 0; r < coin.size(); r++) {
            sys_part += std::conj(coin[r]) * cur.segment(r * sys.size(), sys.size());
        }
        Vec prog = cp.embed.adjoint() * sys_part;
        post = QuantumState::pure(pure.layout(), prog / prog.norm());
    }
    return {static_cast<double>(agree) / static_cast<double>(t), post, t, restore, restored};
}

}  // namespace

ApiResult sampled_api(const QuantumState &state, const std::vector<std::string> &regs,
                      const ProjectiveImplementation &pi, double eps, double delta, Rng &rng, double c,
                      uint64_t max_restore_steps) {
    uint64_t t = api_rounds(eps, delta, c);
    QuantumState pure = sample_pure_component(state, rng);
    std::vector<Vec> parts;
    std::vector<double> weights;
    for (const auto &proj : pi.projectors) {
        parts.push_back(apply_local(pure.vector(), pure.layout(), regs, proj));
        weights.push_back(parts.back().squaredNorm());
    }
    size_t k = sample_index(rng, weights);
    Walk w = simulate_walk(pi.values[k], t, max_restore_steps, rng);
    // Every block picks up sqrt(p)^agree sqrt(1 - p)^disagree along the
    // observed label sequence; combine in log space to avoid underflow.
    std::vector<double> logc(parts.size(), -std::numeric_limits<double>::infinity());
    double best = -std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < parts.size(); j++) {
        double p = pi.values[j];
        if (weights[j] <= 0 || (w.agree > 0 && p <= 0) || (w.disagree > 0 && p >= 1)) {
            continue;
        }
        double l = 0;
        if (w.agree > 0) {
            l += 0.5 * static_cast<double>(w.agree) * std::log(p);
        }
        if (w.disagree > 0) {
            l += 0.5 * static_cast<double>(w.disagree) * std::log(1 - p);
        }
        logc[j] = l;
        best = std::max(best, l);
    }
    QuantumState post = pure;
    if (w.restored) {
        Vec acc = Vec::Zero(pure.vector().size());
        for (size_t j = 0; j < parts.size(); j++) {
            if (std::isfinite(logc[j])) {
                acc += std::exp(logc[j] - best) * parts[j];
            }
        }
        post = QuantumState::pure(pure.layout(), acc / acc.norm());
    }
    return {static_cast<double>(w.agree) / static_cast<double>(t), post, t, w.restore, w.restored};
}

ApiResult sampled_api(const QuantumState &state, const std::vector<std::string> &regs,
                      const ControlledProjection &cp, double eps, double delta, Rng &rng,
                      const ApiOptions &options) {
    uint64_t t = api_rounds(eps, delta, options.c);
    switch (options.backend) {
        case ApiBackend::Spectral:
            return sampled_api(state, regs, proj_impl(cp.mixture()), eps, delta, rng, options.c,
                               options.max_restore_steps);
        case ApiBackend::Explicit:
            return api_explicit(state, regs, cp, t, options.max_restore_steps, rng);
        case ApiBackend::FreshCoin:
            return api_fresh_coin(state, regs, cp, t, rng);
    }
    throw std::logic_error("sampled_api: unknown backend");
}

// ---------------------------------------------------------------------------

double joint_good_probability(const QuantumState &state, const std::vector<std::string> &regs1, const Mat &ti1,
                              const std::vector<std::string> &regs2, const Mat &ti2) {
    Projected a = project(state, regs1, ti1);
    if (a.weight <= 0) {
        return 0;
    }
    QuantumState s = normalized(state.layout(), a);
    return a.weight * project(s, regs2, ti2).weight;
}

JointThresholdResult joint_threshold_measure(const QuantumState &state, const std::vector<std::string> &regs1,
                                             const Mat &ti1, const std::vector<std::string> &regs2, const Mat &ti2,
                                             Rng &rng) {
    for (const auto &r : regs1) {
        if (std::find(regs2.begin(), regs2.end(), r) != regs2.end()) {
            throw std::invalid_argument("joint_threshold_measure: registers overlap");
        }
    }
    // Order independence of the two tests, checked on the accept-accept branch.
    if (state.is_pure()) {
        Vec ab = apply_local(apply_local(state.vector(), state.layout(), regs1, ti1), state.layout(), regs2, ti2);
        Vec ba = apply_local(apply_local(state.vector(), state.layout(), regs2, ti2), state.layout(), regs1, ti1);
        if ((ab - ba).norm() > 1e-9) {
            throw InvariantViolation("joint_threshold_measure: the two threshold tests do not commute");
        }
    }
    double both = joint_good_probability(state, regs1, ti1, regs2, ti2);
    Eigen::Index d1 = ti1.rows();
    Eigen::Index d2 = ti2.rows();
    Mat n1 = Mat::Identity(d1, d1) - ti1;
    Mat n2 = Mat::Identity(d2, d2) - ti2;
    Projected first_yes = project(state, regs1, ti1);
    double p1 = first_yes.weight;
    int b1 = uniform01(rng) < p1 ? 0 : 1;
    QuantumState mid = b1 == 0 ? normalized(state.layout(), first_yes)
                               : normalized(state.layout(), project(state, regs1, n1));
    Projected second_yes = project(mid, regs2, ti2);
    int b2 = uniform01(rng) < second_yes.weight ? 0 : 1;
    QuantumState post =
        b2 == 0 ? normalized(mid.layout(), second_yes) : normalized(mid.layout(), project(mid, regs2, n2));
    return {b1, b2, std::move(post), both};
}

JointThresholdResult joint_threshold_measure(const PirateOutput &pirate, const BinaryPovm &povm1,
                                             const BinaryPovm &povm2, double gamma, Rng &rng) {
    Mat t1 = threshold_impl(proj_impl(povm1), gamma);
    Mat t2 = threshold_impl(proj_impl(povm2), gamma);
    return joint_threshold_measure(pirate.state, pirate.r1.program.names(), t1, pirate.r2.program.names(), t2, rng);
}

nlohmann::json measurement_report(double gamma, std::optional<double> trace, uint64_t shots, uint64_t accepted) {
    nlohmann::json j;
    j["gamma"] = gamma;
    j["trace"] = trace ? nlohmann::json(*trace) : nlohmann::json(nullptr);
    j["shots"] = shots;
    if (shots > 0) {
        auto [lo, hi] = wilson_ci95(accepted, shots);
        j["ci95"] = {lo, hi};
    } else {
        j["ci95"] = nullptr;
    }
    return j;
}

}  // namespace qcp
