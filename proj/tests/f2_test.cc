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

#include <gtest/gtest.h>

#include <map>

#include "test_util.h"

using namespace qcp;
using qcp_test::brute_dual;
using qcp_test::brute_span;

namespace {

std::set<uint64_t> members(const F2Subspace &s) {
    auto e = s.enumerate();
    return {e.begin(), e.end()};
}

F2Subspace from_members(unsigned n, const std::vector<uint64_t> &m) {
    return F2Subspace::span(n, m);
}

}  // namespace

TEST(f2, vector_bit_order) {
    auto v = F2Vector::from_coords({1, 0});
    ASSERT_EQ(v.bits(), 0b10u);
    ASSERT_EQ(v.str(), "10");
    ASSERT_TRUE(v.coord(0));
    ASSERT_FALSE(v.coord(1));
    ASSERT_EQ(F2Vector::from_string("0110").bits(), 0b0110u);
    ASSERT_THROW(F2Vector(2, 0b100), DimensionError);
}

TEST(f2, dot_is_symmetric_and_binary) {
    for (uint64_t a = 0; a < 16; a++) {
        for (uint64_t b = 0; b < 16; b++) {
            F2Vector u(4, a), v(4, b);
            ASSERT_EQ(u.dot(v), v.dot(u));
            ASSERT_EQ(u.dot(v), qcp_test::parity(a & b));
        }
    }
    ASSERT_THROW(F2Vector(3, 1).dot(F2Vector(4, 1)), DimensionError);
}

TEST(f2, rand_subspace_trivial_cases) {
    Rng rng(qcp_test::kTestSeed);
    ASSERT_EQ(rand_subspace(2, 0, rng), F2Subspace::zero(2));
    ASSERT_EQ(rand_subspace(2, 2, rng), F2Subspace::full(2));
    ASSERT_THROW(rand_subspace(2, 3, rng), DimensionError);
}

TEST(f2, rand_subspace_lines_of_plane_are_uniform) {
    Rng rng(qcp_test::kTestSeed);
    std::map<std::vector<uint64_t>, int> counts;
    const int draws = 10000;
    for (int i = 0; i < draws; i++) {
        counts[rand_subspace(2, 1, rng).basis()]++;
    }
    ASSERT_EQ(counts.size(), 3u);
    double p = 1.0 / 3;
    double sigma = std::sqrt(p * (1 - p) / draws);
    for (const auto &[k, c] : counts) {
        ASSERT_NEAR(c / double(draws), p, 3 * sigma);
    }
}

TEST(f2, rand_subspace_chi_squared_dim2_in_4) {
    // 35 two-dimensional subspaces of GF(2)^4, counted independently.
    size_t expected_count = 0;
    for (const auto &s : qcp_test::all_subspaces(4)) {
        if (s.size() == 4) {
            expected_count++;
        }
    }
    ASSERT_EQ(expected_count, 35u);

    Rng rng(qcp_test::kTestSeed + 1);
    std::map<std::vector<uint64_t>, int> counts;
    const int draws = 100000;
    for (int i = 0; i < draws; i++) {
        counts[rand_subspace(4, 2, rng).basis()]++;
    }
    ASSERT_EQ(counts.size(), expected_count);
    double e = double(draws) / expected_count;
    double chi2 = 0;
    for (const auto &[k, c] : counts) {
        chi2 += (c - e) * (c - e) / e;
    }
    // 0.999 quantile of chi^2 with 34 degrees of freedom.
    ASSERT_LT(chi2, 65.2472);
}

TEST(f2, dual_examples) {
    ASSERT_EQ(F2Subspace::zero(3).dual(), F2Subspace::full(3));
    auto line = F2Subspace::span(2, std::vector<F2Vector>{F2Vector::from_coords({1, 0})});
    ASSERT_EQ(members(line.dual()), brute_dual(2, members(line)));
    ASSERT_EQ(line.dual(), F2Subspace::span(2, std::vector<F2Vector>{F2Vector::from_coords({0, 1})}));
}

TEST(f2, dual_exhaustive_up_to_six) {
    for (unsigned n = 1; n <= 6; n++) {
        for (const auto &m : qcp_test::all_subspaces(n)) {
            auto s = from_members(n, m);
            ASSERT_EQ(s.size(), m.size());
            auto d = s.dual();
            ASSERT_EQ(d.dim(), n - s.dim());
            ASSERT_EQ(members(d), brute_dual(n, {m.begin(), m.end()}));
            ASSERT_EQ(d.dual(), s);
        }
    }
}

TEST(f2, member_examples) {
    auto s = F2Subspace::span(2, std::vector<uint64_t>{0b11});
    ASSERT_TRUE(s.member(F2Vector(2, 0)));
    ASSERT_FALSE(s.member(F2Vector::from_coords({1, 0})));
    ASSERT_TRUE(s.member(F2Vector::from_coords({1, 1})));
    ASSERT_THROW(s.member(F2Vector(3, 0)), DimensionError);
    for (unsigned n = 0; n <= 5; n++) {
        Rng rng(n);
        for (unsigned d = 0; d <= n; d++) {
            ASSERT_TRUE(member(rand_subspace(n, d, rng), F2Vector::zero(n)));
        }
    }
}

TEST(f2, enumerate_examples) {
    ASSERT_EQ(F2Subspace::zero(3).enumerate(), (std::vector<uint64_t>{0}));
    auto s = F2Subspace::span(2, std::vector<uint64_t>{0b01});
    auto e = enumerate(s);
    ASSERT_EQ(e.size(), 2u);
    ASSERT_EQ(e[0], F2Vector(2, 0));
    ASSERT_EQ(e[1], F2Vector(2, 1));
    Rng rng(qcp_test::kTestSeed);
    for (int trial = 0; trial < 50; trial++) {
        unsigned n = 1 + trial % 6;
        unsigned d = uniform_below(rng, n + 1);
        auto r = rand_subspace(n, d, rng);
        auto list = r.enumerate();
        ASSERT_EQ(list.size(), uint64_t{1} << d);
        ASSERT_TRUE(std::is_sorted(list.begin(), list.end()));
        ASSERT_EQ(members(r), brute_span(r.basis()));
    }
    ASSERT_THROW(F2Subspace::full(8).enumerate(4), ResourceError);
}

TEST(f2, canonical_form_is_independent_of_generators) {
    Rng rng(qcp_test::kTestSeed);
    for (int trial = 0; trial < 200; trial++) {
        unsigned n = 2 + trial % 9;
        unsigned d = uniform_below(rng, n + 1);
        auto s = rand_subspace(n, d, rng);
        auto m = s.enumerate();
        // Random redundant spanning set drawn from the members.
        std::vector<uint64_t> gens;
        for (unsigned i = 0; i < d + 3; i++) {
            gens.push_back(m[uniform_below(rng, m.size())]);
        }
        for (uint64_t b : s.basis()) {
            gens.push_back(b ^ m[uniform_below(rng, m.size())]);
        }
        auto t = F2Subspace::span(n, gens);
        if (t.dim() == d) {
            ASSERT_EQ(t.basis(), s.basis());
        }
        ASSERT_TRUE(std::all_of(t.basis().begin(), t.basis().end(), [&](uint64_t v) { return s.contains(v); }));
    }
}

TEST(f2, json_round_trip) {
    Rng rng(qcp_test::kTestSeed);
    for (int trial = 0; trial < 20; trial++) {
        auto s = rand_subspace(10, trial % 11, rng);
        auto j = s.to_json();
        ASSERT_EQ(F2Subspace::from_json(j), s);
        ASSERT_EQ(j["n"], 10);
    }
    auto s = F2Subspace::span(4, std::vector<uint64_t>{0b1000, 0b0100});
    ASSERT_EQ(s.to_json().dump(), R"({"basis":["8","4"],"n":4})");
    nlohmann::json bad = {{"n", 4}, {"basis", {"4", "8"}}};
    ASSERT_THROW(F2Subspace::from_json(bad), std::invalid_argument);
}
