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

#include "qcp/f2.h"

#include <algorithm>
#include <bit>
#include <cstdio>

namespace qcp {

uint64_t f2_mask(unsigned n) {
    return n >= 64 ? ~uint64_t{0} : ((uint64_t{1} << n) - 1);
}

F2Vector::F2Vector(unsigned n, uint64_t bits) : n_(n), bits_(bits) {
    if (n > kMaxF2Dim) {
        throw DimensionError("F2Vector: n exceeds 64");
    }
    if ((bits & ~f2_mask(n)) != 0) {
        throw DimensionError("F2Vector: bits outside of length " + std::to_string(n));
    }
}

F2Vector F2Vector::from_string(const std::string &s) {
    if (s.size() > kMaxF2Dim) {
        throw DimensionError("F2Vector: string longer than 64");
    }
    uint64_t bits = 0;
    for (char c : s) {
        if (c != '0' && c != '1') {
            throw std::invalid_argument("F2Vector: expected only '0'/'1' in \"" + s + "\"");
        }
        bits = (bits << 1) | static_cast<uint64_t>(c == '1');
    }
    return F2Vector(static_cast<unsigned>(s.size()), bits);
}

F2Vector F2Vector::from_coords(const std::vector<int> &coords) {
    std::string s;
    for (int c : coords) {
        s.push_back(c ? '1' : '0');
    }
    return from_string(s);
}

bool F2Vector::coord(unsigned i) const {
    if (i >= n_) {
        throw DimensionError("F2Vector::coord out of range");
    }
    return (bits_ >> (n_ - 1 - i)) & 1;
}

int F2Vector::dot(const F2Vector &other) const {
    if (other.n_ != n_) {
        throw DimensionError("F2Vector::dot: length mismatch");
    }
    return f2_dot(bits_, other.bits_);
}

F2Vector F2Vector::operator^(const F2Vector &other) const {
    if (other.n_ != n_) {
        throw DimensionError("F2Vector::operator^: length mismatch");
    }
    return F2Vector(n_, bits_ ^ other.bits_);
}

std::string F2Vector::str() const {
    std::string s(n_, '0');
    for (unsigned i = 0; i < n_; i++) {
        if (coord(i)) {
            s[i] = '1';
        }
    }
    return s;
}

namespace {

int pivot_of(uint64_t row) {
    return 63 - std::countl_zero(row);
}

// Brings an arbitrary list of rows to reduced row-echelon form.
std::vector<uint64_t> rref(std::vector<uint64_t> rows) {
    std::vector<uint64_t> out;
    for (uint64_t r : rows) {
        for (uint64_t b : out) {
            if ((r >> pivot_of(b)) & 1) {
                r ^= b;
            }
        }
        if (r == 0) {
            continue;
        }
        int p = pivot_of(r);
        for (uint64_t &b : out) {
            if ((b >> p) & 1) {
                b ^= r;
            }
        }
        out.push_back(r);
    }
    std::sort(out.begin(), out.end(), [](uint64_t a, uint64_t b) { return a > b; });
    return out;
}

}  // namespace

F2Subspace F2Subspace::zero(unsigned n) {
    if (n > kMaxF2Dim) {
        throw DimensionError("F2Subspace: n exceeds 64");
    }
    return F2Subspace(n, {});
}

F2Subspace F2Subspace::full(unsigned n) {
    if (n > kMaxF2Dim) {
        throw DimensionError("F2Subspace: n exceeds 64");
    }
    std::vector<uint64_t> rows;
    for (unsigned i = 0; i < n; i++) {
        rows.push_back(uint64_t{1} << (n - 1 - i));
    }
    return F2Subspace(n, rows);
}

F2Subspace F2Subspace::span(unsigned n, const std::vector<uint64_t> &generators) {
    if (n > kMaxF2Dim) {
        throw DimensionError("F2Subspace: n exceeds 64");
    }
    for (uint64_t g : generators) {
        if ((g & ~f2_mask(n)) != 0) {
            throw DimensionError("F2Subspace::span: generator longer than n");
        }
    }
    return F2Subspace(n, rref(generators));
}

F2Subspace F2Subspace::span(unsigned n, const std::vector<F2Vector> &generators) {
    std::vector<uint64_t> rows;
    for (const auto &g : generators) {
        if (g.n() != n) {
            throw DimensionError("F2Subspace::span: generator length mismatch");
        }
        rows.push_back(g.bits());
    }
    return span(n, rows);
}

std::vector<F2Vector> F2Subspace::basis_vectors() const {
    std::vector<F2Vector> out;
    for (uint64_t b : basis_) {
        out.emplace_back(n_, b);
    }
    return out;
}

uint64_t F2Subspace::size() const {
    if (dim() >= 64) {
        throw ResourceError("F2Subspace::size overflows");
    }
    return uint64_t{1} << dim();
}

uint64_t F2Subspace::reduce(uint64_t v) const {
    for (uint64_t b : basis_) {
        if ((v >> pivot_of(b)) & 1) {
            v ^= b;
        }
    }
    return v;
}

bool F2Subspace::contains(uint64_t v) const {
    if ((v & ~f2_mask(n_)) != 0) {
        return false;
    }
    return reduce(v) == 0;
}

bool F2Subspace::member(const F2Vector &v) const {
    if (v.n() != n_) {
        throw DimensionError("member: vector length " + std::to_string(v.n()) + " != ambient " +
                             std::to_string(n_));
    }
    return contains(v.bits());
}

F2Subspace F2Subspace::dual() const {
    uint64_t pivots = 0;
    for (uint64_t b : basis_) {
        pivots |= uint64_t{1} << pivot_of(b);
    }
    std::vector<uint64_t> rows;
    for (unsigned j = 0; j < n_; j++) {
        if ((pivots >> j) & 1) {
            continue;
        }
        // Free column j: y_j = 1 and each pivot coordinate cancels its row.
        uint64_t y = uint64_t{1} << j;
        for (uint64_t b : basis_) {
            if ((b >> j) & 1) {
                y |= uint64_t{1} << pivot_of(b);
            }
        }
        rows.push_back(y);
    }
    return F2Subspace(n_, rref(rows));
}

std::vector<uint64_t> F2Subspace::enumerate(unsigned cap) const {
    if (dim() > cap) {
        throw ResourceError("enumerate: dim " + std::to_string(dim()) + " exceeds cap " + std::to_string(cap));
    }
    unsigned d = dim();
    std::vector<uint64_t> out(uint64_t{1} << d);
    for (uint64_t k = 0; k < out.size(); k++) {
        uint64_t v = 0;
        for (unsigned i = 0; i < d; i++) {
            if ((k >> (d - 1 - i)) & 1) {
                v ^= basis_[i];
            }
        }
        out[k] = v;
    }
    return out;
}

namespace {

std::string to_hex(uint64_t v, unsigned n) {
    unsigned digits = std::max(1u, (n + 3) / 4);
    std::string s(digits, '0');
    static const char *kDigits = "0123456789abcdef";
    for (unsigned i = 0; i < digits; i++) {
        s[digits - 1 - i] = kDigits[(v >> (4 * i)) & 0xF];
    }
    return s;
}

}  // namespace

nlohmann::json F2Subspace::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (uint64_t b : basis_) {
        rows.push_back(to_hex(b, n_));
    }
    return {{"n", n_}, {"basis", rows}};
}

F2Subspace F2Subspace::from_json(const nlohmann::json &j) {
    unsigned n = j.at("n").get<unsigned>();
    std::vector<uint64_t> rows;
    for (const auto &h : j.at("basis")) {
        rows.push_back(std::stoull(h.get<std::string>(), nullptr, 16));
    }
    F2Subspace s = span(n, rows);
    if (s.basis_ != rows) {
        throw std::invalid_argument("F2Subspace::from_json: basis is not in canonical RREF order");
    }
    return s;
}

F2Subspace rand_subspace(unsigned n, unsigned d, Rng &rng) {
    if (n > kMaxF2Dim || d > n) {
        throw DimensionError("rand_subspace: need 0 <= d <= n <= 64, got d=" + std::to_string(d) +
                             " n=" + std::to_string(n));
    }
    // A uniformly random ordered independent d-tuple spans a uniformly random
    // subspace, since every subspace has the same number of ordered bases.
    std::vector<uint64_t> picked;
    F2Subspace current = F2Subspace::zero(n);
    while (picked.size() < d) {
        uint64_t v = rng() & f2_mask(n);
        if (current.contains(v)) {
            continue;
        }
        picked.push_back(v);
        current = F2Subspace::span(n, picked);
    }
    return current;
}

F2Subspace dual(const F2Subspace &s) {
    return s.dual();
}

bool member(const F2Subspace &s, const F2Vector &v) {
    return s.member(v);
}

std::vector<F2Vector> enumerate(const F2Subspace &s, unsigned cap) {
    std::vector<F2Vector> out;
    for (uint64_t v : s.enumerate(cap)) {
        out.emplace_back(s.n(), v);
    }
    return out;
}

}  // namespace qcp
