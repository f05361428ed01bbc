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

#include "qcp/qsim.h"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <mutex>
#include <optional>
#include <random>
#include <set>

namespace qcp {

// ---------------------------------------------------------------------------
// RegisterLayout

RegisterLayout::RegisterLayout(std::vector<Register> registers) : registers_(std::move(registers)) {
    std::set<std::string> seen;
    for (const auto &r : registers_) {
        if (r.name.empty()) {
            throw std::invalid_argument("RegisterLayout: empty register name");
        }
        if (!seen.insert(r.name).second) {
            throw std::invalid_argument("RegisterLayout: duplicate register '" + r.name + "'");
        }
        total_ += r.qubits;
    }
    if (total_ > 62) {
        throw ResourceError("RegisterLayout: too many qubits");
    }
}

bool RegisterLayout::has(const std::string &name) const {
    return std::any_of(registers_.begin(), registers_.end(), [&](const Register &r) { return r.name == name; });
}

const Register &RegisterLayout::at(const std::string &name) const {
    for (const auto &r : registers_) {
        if (r.name == name) {
            return r;
        }
    }
    throw std::invalid_argument("unknown register '" + name + "'");
}

unsigned RegisterLayout::shift(const std::string &name) const {
    unsigned s = total_;
    for (const auto &r : registers_) {
        s -= r.qubits;
        if (r.name == name) {
            return s;
        }
    }
    throw std::invalid_argument("unknown register '" + name + "'");
}

uint64_t RegisterLayout::value_of(uint64_t index, const std::string &name) const {
    const auto &r = at(name);
    return (index >> shift(name)) & f2_mask(r.qubits);
}

uint64_t RegisterLayout::with_value(uint64_t index, const std::string &name, uint64_t value) const {
    const auto &r = at(name);
    unsigned s = shift(name);
    uint64_t mask = f2_mask(r.qubits) << s;
    return (index & ~mask) | ((value << s) & mask);
}

RegisterLayout RegisterLayout::operator+(const RegisterLayout &other) const {
    std::vector<Register> regs = registers_;
    regs.insert(regs.end(), other.registers_.begin(), other.registers_.end());
    return RegisterLayout(std::move(regs));
}

RegisterLayout RegisterLayout::subset(const std::vector<std::string> &names) const {
    for (const auto &n : names) {
        at(n);
    }
    std::vector<Register> regs;
    for (const auto &r : registers_) {
        if (std::find(names.begin(), names.end(), r.name) != names.end()) {
            regs.push_back(r);
        }
    }
    return RegisterLayout(std::move(regs));
}

std::vector<std::string> RegisterLayout::names() const {
    std::vector<std::string> out;
    for (const auto &r : registers_) {
        out.push_back(r.name);
    }
    return out;
}

nlohmann::json RegisterLayout::to_json() const {
    nlohmann::json j = nlohmann::json::array();
    for (const auto &r : registers_) {
        j.push_back({{"name", r.name}, {"qubits", r.qubits}});
    }
    return j;
}

// ---------------------------------------------------------------------------
// IndexSplit

IndexSplit::IndexSplit(const RegisterLayout &layout, const std::vector<std::string> &local) {
    for (const auto &n : local) {
        layout.at(n);
    }
    for (const auto &r : layout.registers()) {
        Span span{layout.shift(r.name), r.qubits};
        if (std::find(local.begin(), local.end(), r.name) != local.end()) {
            local_spans_.push_back(span);
            local_bits_ += r.qubits;
        } else {
            rest_spans_.push_back(span);
            rest_bits_ += r.qubits;
        }
    }
}

namespace {

uint64_t gather(uint64_t index, const auto &spans) {
    uint64_t out = 0;
    for (const auto &s : spans) {
        out = (out << s.width) | ((index >> s.shift) & f2_mask(s.width));
    }
    return out;
}

uint64_t scatter(uint64_t packed, const auto &spans) {
    uint64_t out = 0;
    for (auto it = spans.rbegin(); it != spans.rend(); ++it) {
        out |= (packed & f2_mask(it->width)) << it->shift;
        packed >>= it->width;
    }
    return out;
}

}  // namespace

uint64_t IndexSplit::local_of(uint64_t index) const {
    return gather(index, local_spans_);
}

uint64_t IndexSplit::rest_of(uint64_t index) const {
    return gather(index, rest_spans_);
}

uint64_t IndexSplit::join(uint64_t local, uint64_t rest) const {
    return scatter(local, local_spans_) | scatter(rest, rest_spans_);
}

// ---------------------------------------------------------------------------
// QuantumState

namespace {

void check_pure_cap(const RegisterLayout &layout) {
    if (layout.total_qubits() > kMaxPureQubits) {
        throw ResourceError("state vector over " + std::to_string(layout.total_qubits()) + " qubits exceeds cap " +
                            std::to_string(kMaxPureQubits));
    }
}

void check_mixed_cap(const RegisterLayout &layout) {
    if (layout.total_qubits() > kMaxMixedQubits) {
        throw ResourceError("density matrix over " + std::to_string(layout.total_qubits()) +
                            " qubits exceeds cap " + std::to_string(kMaxMixedQubits));
    }
}

}  // namespace

QuantumState QuantumState::pure(RegisterLayout layout, Vec amplitudes) {
    check_pure_cap(layout);
    if (static_cast<uint64_t>(amplitudes.size()) != layout.dim()) {
        throw DimensionError("pure state: amplitude count does not match layout");
    }
    double norm = amplitudes.norm();
    if (std::abs(norm - 1.0) > kNormTol) {
        throw std::invalid_argument("pure state: norm " + std::to_string(norm) + " is not 1");
    }
    return QuantumState(std::move(layout), std::move(amplitudes));
}

QuantumState QuantumState::mixed(RegisterLayout layout, Mat density) {
    check_mixed_cap(layout);
    if (static_cast<uint64_t>(density.rows()) != layout.dim() || density.rows() != density.cols()) {
        throw DimensionError("mixed state: matrix size does not match layout");
    }
    if (!is_hermitian(density)) {
        throw std::invalid_argument("mixed state: density matrix is not Hermitian");
    }
    double tr = density.trace().real();
    if (std::abs(tr - 1.0) > kNormTol) {
        throw std::invalid_argument("mixed state: trace " + std::to_string(tr) + " is not 1");
    }
    Mat herm = (density + density.adjoint()) / 2.0;
    if (hermitian_eigenvalues(herm).minCoeff() < -kPsdTol) {
        throw std::invalid_argument("mixed state: density matrix is not positive semidefinite");
    }
    return QuantumState(std::move(layout), std::move(herm));
}

QuantumState QuantumState::mixed_trusted(RegisterLayout layout, Mat density) {
    check_mixed_cap(layout);
    if (static_cast<uint64_t>(density.rows()) != layout.dim() || density.rows() != density.cols()) {
        throw DimensionError("mixed state: matrix size does not match layout");
    }
    double tr = density.trace().real();
    if (std::abs(tr - 1.0) > kNormTol) {
        throw std::invalid_argument("mixed state: trace " + std::to_string(tr) + " is not 1");
    }
    Mat herm = (density + density.adjoint()) / 2.0;
    return QuantumState(std::move(layout), std::move(herm));
}

QuantumState QuantumState::basis(RegisterLayout layout, uint64_t index) {
    check_pure_cap(layout);
    if (index >= layout.dim()) {
        throw DimensionError("basis state index out of range");
    }
    Vec v = Vec::Zero(static_cast<Eigen::Index>(layout.dim()));
    v[static_cast<Eigen::Index>(index)] = 1.0;
    return QuantumState(std::move(layout), std::move(v));
}

const Vec &QuantumState::vector() const {
    if (!is_pure()) {
        throw std::logic_error("QuantumState::vector on a mixed state");
    }
    return std::get<Vec>(data_);
}

const Mat &QuantumState::matrix() const {
    if (is_pure()) {
        throw std::logic_error("QuantumState::matrix on a pure state");
    }
    return std::get<Mat>(data_);
}

Mat QuantumState::density() const {
    if (is_pure()) {
        check_mixed_cap(layout_);
        const Vec &v = vector();
        return v * v.adjoint();
    }
    return matrix();
}

QuantumState QuantumState::as_mixed() const {
    return QuantumState(layout_, density());
}

double QuantumState::trace() const {
    if (is_pure()) {
        return vector().squaredNorm();
    }
    return matrix().trace().real();
}

nlohmann::json QuantumState::to_json() const {
    nlohmann::json data = nlohmann::json::array();
    if (is_pure()) {
        for (Eigen::Index i = 0; i < vector().size(); i++) {
            data.push_back(vector()[i].real());
            data.push_back(vector()[i].imag());
        }
    } else {
        const Mat &m = matrix();
        for (Eigen::Index r = 0; r < m.rows(); r++) {
            for (Eigen::Index c = 0; c < m.cols(); c++) {
                data.push_back(m(r, c).real());
                data.push_back(m(r, c).imag());
            }
        }
    }
    return {{"layout", layout_.to_json()}, {"form", is_pure() ? "pure" : "mixed"}, {"data", data}};
}

QuantumState QuantumState::from_json(const nlohmann::json &j) {
    std::vector<Register> regs;
    for (const auto &r : j.at("layout")) {
        regs.push_back({r.at("name").get<std::string>(), r.at("qubits").get<unsigned>()});
    }
    RegisterLayout layout(regs);
    const auto &data = j.at("data");
    auto entry = [&](size_t k) { return Complex(data.at(2 * k).get<double>(), data.at(2 * k + 1).get<double>()); };
    auto dim = static_cast<Eigen::Index>(layout.dim());
    std::string form = j.at("form").get<std::string>();
    if (form == "pure") {
        Vec v(dim);
        for (Eigen::Index i = 0; i < dim; i++) {
            v[i] = entry(static_cast<size_t>(i));
        }
        return pure(layout, v);
    }
    if (form == "mixed") {
        Mat m(dim, dim);
        for (Eigen::Index r = 0; r < dim; r++) {
            for (Eigen::Index c = 0; c < dim; c++) {
                m(r, c) = entry(static_cast<size_t>(r * dim + c));
            }
        }
        return mixed(layout, m);
    }
    throw std::invalid_argument("QuantumState::from_json: unknown form '" + form + "'");
}

QuantumState tensor(const QuantumState &a, const QuantumState &b) {
    RegisterLayout layout = a.layout() + b.layout();
    if (a.is_pure() && b.is_pure()) {
        check_pure_cap(layout);
        const Vec &x = a.vector();
        const Vec &y = b.vector();
        Vec out(x.size() * y.size());
        for (Eigen::Index i = 0; i < x.size(); i++) {
            out.segment(i * y.size(), y.size()) = x[i] * y;
        }
        return QuantumState::pure(layout, out);
    }
    check_mixed_cap(layout);
    Mat x = a.density();
    Mat y = b.density();
    Mat out(x.rows() * y.rows(), x.cols() * y.cols());
    for (Eigen::Index i = 0; i < x.rows(); i++) {
        for (Eigen::Index j = 0; j < x.cols(); j++) {
            out.block(i * y.rows(), j * y.cols(), y.rows(), y.cols()) = x(i, j) * y;
        }
    }
    return QuantumState::mixed(layout, out);
}

// ---------------------------------------------------------------------------
// Operations

QuantumState prepare_subspace_state(const F2Subspace &s, const std::string &name) {
    RegisterLayout layout({{name, s.n()}});
    check_pure_cap(layout);
    auto members = s.enumerate(kMaxPureQubits);
    Vec v = Vec::Zero(static_cast<Eigen::Index>(layout.dim()));
    double amp = 1.0 / std::sqrt(static_cast<double>(members.size()));
    for (uint64_t m : members) {
        v[static_cast<Eigen::Index>(m)] = amp;
    }
    return QuantumState::pure(layout, v);
}

void hadamard_all_inplace(Vec &psi, const RegisterLayout &layout, const std::string &reg) {
    unsigned s = layout.shift(reg);
    unsigned w = layout.width(reg);
    const double h = 1.0 / std::sqrt(2.0);
    auto dim = static_cast<uint64_t>(psi.size());
    for (unsigned q = s; q < s + w; q++) {
        uint64_t bit = uint64_t{1} << q;
        for (uint64_t hi = 0; hi < dim; hi += 2 * bit) {
            for (uint64_t i = hi; i < hi + bit; i++) {
                Complex a = psi[static_cast<Eigen::Index>(i)];
                Complex b = psi[static_cast<Eigen::Index>(i | bit)];
                if (a == Complex(0) && b == Complex(0)) {
                    continue;
                }
                psi[static_cast<Eigen::Index>(i)] = h * (a + b);
                psi[static_cast<Eigen::Index>(i | bit)] = h * (a - b);
            }
        }
    }
}

QuantumState hadamard_all(const QuantumState &state, const std::string &reg) {
    const auto &layout = state.layout();
    if (state.is_pure()) {
        Vec v = state.vector();
        hadamard_all_inplace(v, layout, reg);
        return QuantumState::pure(layout, v);
    }
    // H rho H: transform columns, then rows (H is real symmetric).
    Mat m = state.matrix();
    for (Eigen::Index c = 0; c < m.cols(); c++) {
        Vec col = m.col(c);
        hadamard_all_inplace(col, layout, reg);
        m.col(c) = col;
    }
    for (Eigen::Index r = 0; r < m.rows(); r++) {
        Vec row = m.row(r).transpose();
        hadamard_all_inplace(row, layout, reg);
        m.row(r) = row.transpose();
    }
    return QuantumState::mixed(layout, m);
}

namespace {

struct Offsets {
    std::vector<uint64_t> local;
    std::vector<uint64_t> rest;
};

Offsets offsets_for(const RegisterLayout &layout, const std::vector<std::string> &regs) {
    IndexSplit split(layout, regs);
    Offsets o;
    o.local.resize(split.local_dim());
    o.rest.resize(split.rest_dim());
    for (uint64_t l = 0; l < o.local.size(); l++) {
        o.local[l] = split.join(l, 0);
    }
    for (uint64_t r = 0; r < o.rest.size(); r++) {
        o.rest[r] = split.join(0, r);
    }
    return o;
}

}  // namespace

namespace {

bool is_diagonal(const Mat &m) {
    for (Eigen::Index c = 0; c < m.cols(); c++) {
        for (Eigen::Index r = 0; r < m.rows(); r++) {
            if (r != c && m(r, c) != Complex(0)) {
                return false;
            }
        }
    }
    return true;
}

}  // namespace

Vec apply_local(const Vec &psi, const RegisterLayout &layout, const std::vector<std::string> &regs, const Mat &op) {
    Offsets o = offsets_for(layout, regs);
    auto L = static_cast<Eigen::Index>(o.local.size());
    if (op.rows() != L || op.cols() != L) {
        throw DimensionError("apply_local: operator size does not match registers");
    }
    Vec out(psi.size());
    if (is_diagonal(op)) {
        for (Eigen::Index l = 0; l < L; l++) {
            Complex d = op(l, l);
            for (uint64_t r : o.rest) {
                auto i = static_cast<Eigen::Index>(o.local[l] | r);
                out[i] = d * psi[i];
            }
        }
        return out;
    }
    // Gather every slice into one matrix so the product is a single GEMM.
    auto R = static_cast<Eigen::Index>(o.rest.size());
    Mat slices(L, R);
    for (Eigen::Index t = 0; t < R; t++) {
        for (Eigen::Index l = 0; l < L; l++) {
            slices(l, t) = psi[static_cast<Eigen::Index>(o.local[l] | o.rest[t])];
        }
    }
    Mat res = op * slices;
    for (Eigen::Index t = 0; t < R; t++) {
        for (Eigen::Index l = 0; l < L; l++) {
            out[static_cast<Eigen::Index>(o.local[l] | o.rest[t])] = res(l, t);
        }
    }
    return out;
}

Mat apply_local(const Mat &rho, const RegisterLayout &layout, const std::vector<std::string> &regs, const Mat &op) {
    Mat tmp(rho.rows(), rho.cols());
    for (Eigen::Index c = 0; c < rho.cols(); c++) {
        tmp.col(c) = apply_local(Vec(rho.col(c)), layout, regs, op);
    }
    Mat out(rho.rows(), rho.cols());
    Mat adj = tmp.adjoint();
    for (Eigen::Index c = 0; c < adj.cols(); c++) {
        out.col(c) = apply_local(Vec(adj.col(c)), layout, regs, op);
    }
    return out.adjoint();
}

double local_expectation(const QuantumState &state, const std::vector<std::string> &regs, const Mat &op) {
    if (state.is_pure()) {
        if (is_diagonal(op)) {
            Offsets o = offsets_for(state.layout(), regs);
            if (op.rows() != static_cast<Eigen::Index>(o.local.size()) || op.cols() != op.rows()) {
                throw DimensionError("local_expectation: operator size does not match registers");
            }
            const Vec &psi = state.vector();
            double acc = 0;
            for (size_t l = 0; l < o.local.size(); l++) {
                double d = op(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(l)).real();
                if (d == 0) {
                    continue;
                }
                for (uint64_t r : o.rest) {
                    acc += d * std::norm(psi[static_cast<Eigen::Index>(o.local[l] | r)]);
                }
            }
            return acc;
        }
        Vec w = apply_local(state.vector(), state.layout(), regs, op);
        return state.vector().dot(w).real();
    }
    Offsets o = offsets_for(state.layout(), regs);
    const Mat &rho = state.matrix();
    Complex acc = 0;
    // Tr[(op (x) I) rho] = sum_{r, l, l'} op(l, l') rho(l' r, l r).
    for (uint64_t r : o.rest) {
        for (size_t l = 0; l < o.local.size(); l++) {
            for (size_t lp = 0; lp < o.local.size(); lp++) {
                acc += op(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(lp)) *
                       rho(static_cast<Eigen::Index>(o.local[lp] | r), static_cast<Eigen::Index>(o.local[l] | r));
            }
        }
    }
    return acc.real();
}

double rank_one_expectation(const QuantumState &state, const std::vector<std::string> &regs, const Vec &a) {
    Offsets o = offsets_for(state.layout(), regs);
    if (static_cast<size_t>(a.size()) != o.local.size()) {
        throw DimensionError("rank_one_expectation: vector size does not match registers");
    }
    if (!state.is_pure()) {
        return local_expectation(state, regs, a * a.adjoint());
    }
    const Vec &psi = state.vector();
    double acc = 0;
    for (uint64_t r : o.rest) {
        Complex amp = 0;
        for (size_t l = 0; l < o.local.size(); l++) {
            amp += std::conj(a[static_cast<Eigen::Index>(l)]) * psi[static_cast<Eigen::Index>(o.local[l] | r)];
        }
        acc += std::norm(amp);
    }
    return acc;
}

QuantumState rank_one_postselect(const QuantumState &state, const std::vector<std::string> &regs, const Vec &a) {
    Offsets o = offsets_for(state.layout(), regs);
    if (static_cast<size_t>(a.size()) != o.local.size()) {
        throw DimensionError("rank_one_postselect: vector size does not match registers");
    }
    if (!state.is_pure()) {
        Mat proj = a * a.adjoint();
        Mat m = apply_local(state.matrix(), state.layout(), regs, proj);
        double w = m.trace().real();
        if (!(w > 0)) {
            throw std::invalid_argument("rank_one_postselect: outcome has probability zero");
        }
        m /= w;
        return QuantumState::mixed(state.layout(), (m + m.adjoint()) / 2.0);
    }
    const Vec &psi = state.vector();
    Vec out = Vec::Zero(psi.size());
    for (uint64_t r : o.rest) {
        Complex amp = 0;
        for (size_t l = 0; l < o.local.size(); l++) {
            amp += std::conj(a[static_cast<Eigen::Index>(l)]) * psi[static_cast<Eigen::Index>(o.local[l] | r)];
        }
        for (size_t l = 0; l < o.local.size(); l++) {
            out[static_cast<Eigen::Index>(o.local[l] | r)] = amp * a[static_cast<Eigen::Index>(l)];
        }
    }
    double n = out.norm();
    if (!(n > 0)) {
        throw std::invalid_argument("rank_one_postselect: outcome has probability zero");
    }
    return QuantumState::pure(state.layout(), out / n);
}

QuantumState partial_trace(const QuantumState &state, const std::vector<std::string> &keep) {
    const auto &layout = state.layout();
    RegisterLayout kept = layout.subset(keep);
    check_mixed_cap(kept);
    Offsets o = offsets_for(layout, keep);
    auto K = static_cast<Eigen::Index>(o.local.size());
    auto T = static_cast<Eigen::Index>(o.rest.size());
    Mat out = Mat::Zero(K, K);
    if (state.is_pure()) {
        const Vec &psi = state.vector();
        Mat m(K, T);
        for (Eigen::Index k = 0; k < K; k++) {
            for (Eigen::Index t = 0; t < T; t++) {
                m(k, t) = psi[static_cast<Eigen::Index>(o.local[k] | o.rest[t])];
            }
        }
        out = m * m.adjoint();
    } else {
        const Mat &rho = state.matrix();
        for (Eigen::Index k = 0; k < K; k++) {
            for (Eigen::Index kp = 0; kp < K; kp++) {
                Complex acc = 0;
                for (Eigen::Index t = 0; t < T; t++) {
                    acc += rho(static_cast<Eigen::Index>(o.local[k] | o.rest[t]),
                               static_cast<Eigen::Index>(o.local[kp] | o.rest[t]));
                }
                out(k, kp) = acc;
            }
        }
    }
    out = (out + out.adjoint()) / 2.0;
    return QuantumState::mixed(kept, out);
}

QuantumState purify(const QuantumState &state, const std::string &purifier_name) {
    if (state.layout().has(purifier_name)) {
        throw std::invalid_argument("purify: register '" + purifier_name + "' already exists");
    }
    Mat rho = state.density();
    Eigen::SelfAdjointEigenSolver<Mat> es(rho);
    const auto &evals = es.eigenvalues();
    std::vector<Eigen::Index> support;
    for (Eigen::Index k = evals.size() - 1; k >= 0; k--) {
        if (evals[k] > 1e-14) {
            support.push_back(k);
        }
    }
    unsigned b_qubits = index_bits(support.size());
    RegisterLayout layout = state.layout() + RegisterLayout({{purifier_name, b_qubits}});
    check_pure_cap(layout);
    uint64_t bdim = uint64_t{1} << b_qubits;
    Vec psi = Vec::Zero(static_cast<Eigen::Index>(layout.dim()));
    for (size_t j = 0; j < support.size(); j++) {
        Eigen::Index k = support[j];
        double w = std::sqrt(evals[k]);
        for (Eigen::Index i = 0; i < rho.rows(); i++) {
            psi[static_cast<Eigen::Index>(static_cast<uint64_t>(i) * bdim + j)] = w * es.eigenvectors()(i, k);
        }
    }
    psi /= psi.norm();
    return QuantumState::pure(layout, psi);
}

double trace_distance(const QuantumState &a, const QuantumState &b) {
    if (!(a.layout() == b.layout())) {
        throw DimensionError("trace_distance: layout mismatch");
    }
    if (a.is_pure() && b.is_pure()) {
        double ov = std::norm(a.vector().dot(b.vector()));
        return std::sqrt(std::max(0.0, 1.0 - ov));
    }
    Mat diff = a.density() - b.density();
    diff = (diff + diff.adjoint()) / 2.0;
    auto evals = hermitian_eigenvalues(diff);
    return 0.5 * evals.cwiseAbs().sum();
}

double fidelity(const QuantumState &a, const QuantumState &b) {
    if (!(a.layout() == b.layout())) {
        throw DimensionError("fidelity: layout mismatch");
    }
    if (a.is_pure() && b.is_pure()) {
        return std::norm(a.vector().dot(b.vector()));
    }
    if (a.is_pure()) {
        return a.vector().dot(b.matrix() * a.vector()).real();
    }
    if (b.is_pure()) {
        return b.vector().dot(a.matrix() * b.vector()).real();
    }
    throw std::invalid_argument("fidelity: needs at least one pure argument");
}

std::vector<double> outcome_probabilities(const QuantumState &state, const std::string &reg) {
    const auto &layout = state.layout();
    unsigned s = layout.shift(reg);
    uint64_t mask = f2_mask(layout.width(reg));
    std::vector<double> probs(uint64_t{1} << layout.width(reg), 0.0);
    for (uint64_t i = 0; i < layout.dim(); i++) {
        auto ii = static_cast<Eigen::Index>(i);
        double p = state.is_pure() ? std::norm(state.vector()[ii]) : state.matrix()(ii, ii).real();
        probs[(i >> s) & mask] += p;
    }
    return probs;
}

MeasureResult postselect_register(const QuantumState &state, const std::string &reg, uint64_t value) {
    const auto &layout = state.layout();
    unsigned s = layout.shift(reg);
    uint64_t mask = f2_mask(layout.width(reg));
    auto keep = [&](uint64_t i) { return ((i >> s) & mask) == value; };
    if (state.is_pure()) {
        Vec v = state.vector();
        for (uint64_t i = 0; i < layout.dim(); i++) {
            if (!keep(i)) {
                v[static_cast<Eigen::Index>(i)] = 0;
            }
        }
        double p = v.squaredNorm();
        if (!(p > 0)) {
            throw std::invalid_argument("postselect_register: outcome has probability zero");
        }
        v /= std::sqrt(p);
        return {value, QuantumState::pure(layout, v), p};
    }
    Mat m = state.matrix();
    for (uint64_t i = 0; i < layout.dim(); i++) {
        for (uint64_t j = 0; j < layout.dim(); j++) {
            if (!keep(i) || !keep(j)) {
                m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 0;
            }
        }
    }
    double p = m.trace().real();
    if (!(p > 0)) {
        throw std::invalid_argument("postselect_register: outcome has probability zero");
    }
    m /= p;
    return {value, QuantumState::mixed(layout, m), p};
}

MeasureResult measure_register(const QuantumState &state, const std::string &reg, Rng &rng) {
    auto probs = outcome_probabilities(state, reg);
    uint64_t outcome = sample_index(rng, probs);
    return postselect_register(state, reg, outcome);
}

QuantumState drop_register(const QuantumState &state, const std::string &reg) {
    const auto &layout = state.layout();
    auto probs = outcome_probabilities(state, reg);
    auto it = std::max_element(probs.begin(), probs.end());
    if (*it < 1.0 - 1e-9) {
        throw std::invalid_argument("drop_register: register '" + reg + "' is not in a basis state");
    }
    uint64_t value = static_cast<uint64_t>(it - probs.begin());
    std::vector<std::string> rest;
    for (const auto &r : layout.registers()) {
        if (r.name != reg) {
            rest.push_back(r.name);
        }
    }
    RegisterLayout out_layout = layout.subset(rest);
    IndexSplit split(layout, rest);
    uint64_t fixed_rest = value;  // the dropped register is the only "rest" register
    if (state.is_pure()) {
        Vec v(static_cast<Eigen::Index>(out_layout.dim()));
        for (uint64_t k = 0; k < out_layout.dim(); k++) {
            v[static_cast<Eigen::Index>(k)] = state.vector()[static_cast<Eigen::Index>(split.join(k, fixed_rest))];
        }
        v /= v.norm();
        return QuantumState::pure(out_layout, v);
    }
    auto D = static_cast<Eigen::Index>(out_layout.dim());
    Mat m(D, D);
    for (Eigen::Index a = 0; a < D; a++) {
        for (Eigen::Index b = 0; b < D; b++) {
            m(a, b) = state.matrix()(static_cast<Eigen::Index>(split.join(static_cast<uint64_t>(a), fixed_rest)),
                                     static_cast<Eigen::Index>(split.join(static_cast<uint64_t>(b), fixed_rest)));
        }
    }
    m /= m.trace().real();
    return QuantumState::mixed(out_layout, m);
}

namespace {

std::mutex g_gentle_mutex;
GentleStats g_gentle_stats;

}  // namespace

GentleStats gentle_stats() {
    std::lock_guard<std::mutex> lock(g_gentle_mutex);
    return g_gentle_stats;
}

namespace {

GentleResult gentle_apply(const QuantumState &state, const Mat &projector, std::optional<int> forced, Rng *rng,
                          const std::vector<std::string> &regs_in) {
    if (!is_projector(projector)) {
        throw std::invalid_argument("gentle_measure: operator is not a Hermitian idempotent");
    }
    std::vector<std::string> regs = regs_in.empty() ? state.layout().names() : regs_in;
    const auto &layout = state.layout();
    double p0 = std::clamp(local_expectation(state, regs, projector), 0.0, 1.0);
    int outcome = forced ? *forced : (uniform01(*rng) < p0 ? 0 : 1);
    Mat complement;
    if (outcome == 1) {
        complement = Mat::Identity(projector.rows(), projector.cols()) - projector;
    }
    const Mat &op = outcome == 0 ? projector : complement;
    double prob = outcome == 0 ? p0 : 1.0 - p0;
    if (!(prob > 0)) {
        throw std::invalid_argument("gentle_postselect: outcome has probability zero");
    }
    QuantumState post;
    if (state.is_pure()) {
        Vec v = apply_local(state.vector(), layout, regs, op);
        v /= v.norm();
        post = QuantumState::pure(layout, std::move(v));
    } else {
        Mat m = apply_local(state.matrix(), layout, regs, op);
        m /= m.trace().real();
        post = QuantumState::mixed(layout, (m + m.adjoint()) / 2.0);
    }
    double dist = trace_distance(post, state);
    double bound = std::sqrt(std::max(0.0, 1.0 - prob));
    // Compare squares: a pure-state distance is sqrt(1 - F), so rounding in F
    // near 1 shows up as ~1e-8 in the distance itself.
    bool violated = dist * dist > bound * bound + 1e-9;
    {
        std::lock_guard<std::mutex> lock(g_gentle_mutex);
        g_gentle_stats.worst_slack = g_gentle_stats.invocations == 0
                                         ? dist - bound
                                         : std::max(g_gentle_stats.worst_slack, dist - bound);
        g_gentle_stats.invocations++;
        if (violated) {
            g_gentle_stats.violations++;
        }
    }
    if (violated) {
        throw InvariantViolation("gentle measurement bound violated: distance " + std::to_string(dist) +
                                 " > sqrt(eps) " + std::to_string(bound));
    }
    return {outcome, std::move(post), prob, dist};
}

}  // namespace

GentleResult gentle_measure(const QuantumState &state, const Mat &projector, Rng &rng,
                            const std::vector<std::string> &regs) {
    return gentle_apply(state, projector, std::nullopt, &rng, regs);
}

GentleResult gentle_postselect(const QuantumState &state, const Mat &projector, int outcome,
                               const std::vector<std::string> &regs) {
    return gentle_apply(state, projector, outcome, nullptr, regs);
}

bool is_hermitian(const Mat &m, double tol) {
    if (m.rows() != m.cols()) {
        return false;
    }
    return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

bool is_projector(const Mat &m, double tol) {
    if (m.rows() != m.cols()) {
        return false;
    }
    if (is_diagonal(m)) {
        for (Eigen::Index i = 0; i < m.rows(); i++) {
            Complex d = m(i, i);
            if (std::abs(d.imag()) > tol || (std::abs(d.real()) > tol && std::abs(d.real() - 1) > tol)) {
                return false;
            }
        }
        return true;
    }
    if (!is_hermitian(m, tol)) {
        return false;
    }
    if (m.rows() <= 64) {
        return (m * m - m).cwiseAbs().maxCoeff() <= tol;
    }
    // Large operators: test P(Pv) = Pv on fixed Gaussian probes instead of
    // forming P^2. A Hermitian non-idempotent P fails this with probability 1.
    Rng rng(0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> gauss;
    Mat probes(m.rows(), 2);
    for (Eigen::Index i = 0; i < probes.size(); i++) {
        probes(i) = Complex(gauss(rng), gauss(rng));
    }
    Mat pv = m * probes;
    double scale = std::max(1.0, probes.cwiseAbs().maxCoeff());
    return (m * pv - pv).cwiseAbs().maxCoeff() <= tol * scale * std::sqrt(static_cast<double>(m.rows()));
}

Eigen::VectorXd hermitian_eigenvalues(const Mat &m) {
    Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

}  // namespace qcp
