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

#ifndef QCP_F2_H
#define QCP_F2_H

#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "qcp/common.h"

namespace qcp {

inline constexpr unsigned kMaxF2Dim = 64;
inline constexpr unsigned kDefaultEnumerationCap = 20;

/// A vector in GF(2)^n packed into one machine word.
///
/// Coordinate 0 is the most significant of the n bits, so the tuple (1,0)
/// packs to 0b10 and matches the computational basis label |10>.
class F2Vector {
   public:
    F2Vector() = default;
    F2Vector(unsigned n, uint64_t bits);

    static F2Vector zero(unsigned n) { return F2Vector(n, 0); }
    /// Parses a string of '0'/'1' characters, coordinate 0 first.
    static F2Vector from_string(const std::string &s);
    static F2Vector from_coords(const std::vector<int> &coords);

    unsigned n() const { return n_; }
    uint64_t bits() const { return bits_; }
    bool coord(unsigned i) const;
    bool is_zero() const { return bits_ == 0; }

    /// Inner product mod 2.
    int dot(const F2Vector &other) const;

    F2Vector operator^(const F2Vector &other) const;
    bool operator==(const F2Vector &other) const = default;

    std::string str() const;

   private:
    unsigned n_ = 0;
    uint64_t bits_ = 0;
};

/// Mask with the low n bits set.
uint64_t f2_mask(unsigned n);

/// Inner product mod 2 of packed vectors.
inline int f2_dot(uint64_t a, uint64_t b) { return __builtin_parityll(a & b); }

/// A linear subspace of GF(2)^n stored as its reduced row-echelon basis.
///
/// Rows are sorted by pivot (highest bit first) and every pivot column is
/// zero in all other rows, so equal subspaces have bit-identical bases.
class F2Subspace {
   public:
    F2Subspace() = default;

    static F2Subspace zero(unsigned n);
    static F2Subspace full(unsigned n);
    /// Span of arbitrary (possibly dependent) generators.
    static F2Subspace span(unsigned n, const std::vector<uint64_t> &generators);
    static F2Subspace span(unsigned n, const std::vector<F2Vector> &generators);

    unsigned n() const { return n_; }
    unsigned dim() const { return static_cast<unsigned>(basis_.size()); }
    const std::vector<uint64_t> &basis() const { return basis_; }
    std::vector<F2Vector> basis_vectors() const;

    /// |S| = 2^dim.
    uint64_t size() const;

    bool contains(uint64_t v) const;
    /// Membership including the zero vector. Throws on length mismatch.
    bool member(const F2Vector &v) const;

    /// Orthogonal complement; dim(dual) = n - dim.
    F2Subspace dual() const;

    /// All 2^dim members in lexicographic order of the coefficient vector
    /// over the stored basis (which is also ascending numeric order).
    std::vector<uint64_t> enumerate(unsigned cap = kDefaultEnumerationCap) const;

    /// Reduces v against the basis; zero iff v is a member.
    uint64_t reduce(uint64_t v) const;

    bool operator==(const F2Subspace &other) const = default;

    nlohmann::json to_json() const;
    static F2Subspace from_json(const nlohmann::json &j);

   private:
    F2Subspace(unsigned n, std::vector<uint64_t> basis) : n_(n), basis_(std::move(basis)) {}

    unsigned n_ = 0;
    std::vector<uint64_t> basis_;
};

/// Subspace of dimension exactly d drawn uniformly from all d-dimensional
/// subspaces of GF(2)^n.
F2Subspace rand_subspace(unsigned n, unsigned d, Rng &rng);

F2Subspace dual(const F2Subspace &s);
bool member(const F2Subspace &s, const F2Vector &v);
std::vector<F2Vector> enumerate(const F2Subspace &s, unsigned cap = kDefaultEnumerationCap);

}  // namespace qcp

#endif
