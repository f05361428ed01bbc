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

#include <gtest/gtest.h>

#include <map>
#include <sstream>

#include "test_util.h"

using namespace qcp;

namespace {

OraclePtr share(InstrumentedOracle o) {
    return std::make_shared<const InstrumentedOracle>(std::move(o));
}

}  // namespace

TEST(oracles, classical_function_basics) {
    auto f = ClassicalFunction::random(8, 3, uint64_t{5});
    ASSERT_EQ(f, ClassicalFunction::random(8, 3, uint64_t{5}));
    ASSERT_EQ(f.domain(), 8u);
    ASSERT_EQ(f.in_bits(), 3u);
    ASSERT_THROW(f(8), std::out_of_range);
    ASSERT_THROW(ClassicalFunction({4}, 2), DimensionError);
    auto g = ClassicalFunction::random(8, 3, uint64_t{6});
    auto h = f ^ g;
    for (uint64_t x = 0; x < 8; x++) {
        ASSERT_EQ(h(x), f(x) ^ g(x));
    }
}

TEST(oracles, identity_gate_is_cnot) {
    auto gate = classical_gate(ClassicalFunction({0, 1}, 1));
    Mat cnot = Mat::Zero(4, 4);
    cnot(0, 0) = cnot(1, 1) = cnot(3, 2) = cnot(2, 3) = 1;
    ASSERT_LT((oracle_matrix(gate) - cnot).norm(), 1e-15);
}

TEST(oracles, gates_are_self_inverse_unitaries) {
    Rng rng(qcp_test::kTestSeed);
    for (int trial = 0; trial < 10; trial++) {
        auto f = ClassicalFunction::random(1 + uniform_below(rng, 32), 1 + trial % 4, rng);
        auto m = oracle_matrix(classical_gate(f));
        auto id = Mat::Identity(m.rows(), m.cols());
        ASSERT_LT((m * m - id).norm(), 1e-9);
        ASSERT_LT((m.adjoint() * m - id).norm(), 1e-9);
    }
    auto a = rand_subspace(4, 2, rng);
    auto ops = cp_oracles(a, ClassicalFunction::random(4, 2, rng), ClassicalFunction::random(4, 2, rng));
    for (const auto &o : {ops.o1, ops.o2}) {
        auto m = oracle_matrix(*o);
        ASSERT_LT((m * m - Mat::Identity(m.rows(), m.cols())).norm(), 1e-9);
    }

    // Double application through the circuit runner on random states.
    auto f = ClassicalFunction::random(16, 3, rng);
    RegisterLayout l({{"x", 4}, {"y", 3}});
    OracleBinding b{{"f", share(classical_gate(f))}};
    Circuit c{QueryOp{"f", {"x"}, 0, 0, "y"}, QueryOp{"f", {"x"}, 0, 0, "y"}};
    for (int trial = 0; trial < 10; trial++) {
        Vec v = qcp_test::random_state(128, rng);
        Vec w = v;
        run_circuit(c, w, l, b);
        ASSERT_LT((w - v).norm(), 1e-10);
    }
}

TEST(oracles, query_on_uniform_superposition_reproduces_histogram) {
    Rng rng(qcp_test::kTestSeed);
    auto f = ClassicalFunction::random(8, 2, rng);
    std::map<uint64_t, double> expected;
    for (uint64_t x = 0; x < 8; x++) {
        expected[f(x)] += 1.0 / 8;
    }
    RegisterLayout l({{"x", 3}, {"y", 2}});
    auto s = hadamard_all(QuantumState::zeros(l), "x");
    s = run_circuit({QueryOp{"f", {"x"}, 0, 0, "y"}}, s, {{"f", share(classical_gate(f))}});
    auto probs = outcome_probabilities(s, "y");
    for (uint64_t y = 0; y < 4; y++) {
        ASSERT_NEAR(probs[y], expected[y], 1e-12);
    }
}

TEST(oracles, membership_oracle_exhaustive) {
    for (unsigned n = 1; n <= 6; n++) {
        for (const auto &m : qcp_test::all_subspaces(n)) {
            std::set<uint64_t> members(m.begin(), m.end());
            auto o = membership_oracle(F2Subspace::span(n, m));
            ASSERT_EQ(o.encoded(0), 0u);
            for (uint64_t v = 0; v < (uint64_t{1} << n); v++) {
                ASSERT_EQ(o.encoded(v), v != 0 && members.count(v) ? 1u : 0u);
            }
        }
    }
}

TEST(oracles, membership_query_on_subspace_state) {
    Rng rng(qcp_test::kTestSeed);
    for (unsigned n : {2u, 4u, 6u}) {
        auto a = rand_subspace(n, n / 2, rng);
        RegisterLayout l({{"A", n}, {"flag", 1}});
        auto s = tensor(prepare_subspace_state(a), QuantumState::zeros(RegisterLayout({{"flag", 1}})));
        s = run_circuit({QueryOp{"U", {"A"}, 0, 0, "flag"}}, s, {{"U", share(membership_oracle(a))}});
        double size = std::pow(2.0, n / 2);
        ASSERT_NEAR(outcome_probabilities(s, "flag")[1], 1 - 1 / size, 1e-12);
    }
}

TEST(oracles, cp_oracle_payloads) {
    Rng rng(qcp_test::kTestSeed);
    for (unsigned n : {2u, 4u, 6u}) {
        auto a = rand_subspace(n, n / 2, rng);
        auto ad = a.dual();
        auto f = ClassicalFunction::random(4, 2, rng);
        auto g = ClassicalFunction::random(4, 2, rng);
        auto ops = cp_oracles(a, f, g);
        auto sw = swapped_cp_oracles(a, f, g);
        for (uint64_t x = 0; x < 4; x++) {
            ASSERT_FALSE(ops.o1->answer((x << n) | 0).has_value());
            ASSERT_FALSE(sw.o2->answer((x << n) | 0).has_value());
            for (uint64_t v = 1; v < (uint64_t{1} << n); v++) {
                auto a1 = ops.o1->answer((x << n) | v);
                auto a2 = ops.o2->answer((x << n) | v);
                ASSERT_EQ(a1.has_value(), a.contains(v));
                ASSERT_EQ(a2.has_value(), ad.contains(v));
                if (a1) {
                    ASSERT_EQ(*a1, f(x) ^ g(x));
                    ASSERT_EQ(*sw.o1->answer((x << n) | v), g(x));
                }
                if (a2) {
                    ASSERT_EQ(*a2, g(x));
                    ASSERT_EQ(*sw.o2->answer((x << n) | v), f(x) ^ g(x));
                }
            }
            for (uint64_t v : a.enumerate()) {
                for (uint64_t w : ad.enumerate()) {
                    if (v != 0 && w != 0) {
                        ASSERT_EQ(*ops.o1->answer((x << n) | v) ^ *ops.o2->answer((x << n) | w), f(x));
                    }
                }
            }
        }
    }
}

TEST(oracles, swapped_oracles_have_the_same_distribution) {
    Rng rng(qcp_test::kTestSeed);
    auto a = rand_subspace(4, 2, rng);
    auto f = ClassicalFunction::random(4, 2, rng);
    uint64_t v = a.enumerate()[1];
    uint64_t w = a.dual().enumerate()[1];
    std::map<uint64_t, double> h1, h2;
    const int seeds = 10000;
    for (int s = 0; s < seeds; s++) {
        auto g = ClassicalFunction::random(4, 2, derive_seed(qcp_test::kTestSeed, s));
        auto ops = cp_oracles(a, f, g);
        auto sw = swapped_cp_oracles(a, f, g);
        for (uint64_t x = 0; x < 4; x++) {
            h1[(*ops.o1->answer((x << 4) | v) << 2) | *ops.o2->answer((x << 4) | w)] += 1.0 / (4 * seeds);
            h2[(*sw.o1->answer((x << 4) | v) << 2) | *sw.o2->answer((x << 4) | w)] += 1.0 / (4 * seeds);
        }
    }
    double tv = 0;
    for (uint64_t k = 0; k < 16; k++) {
        tv += std::abs(h1[k] - h2[k]) / 2;
    }
    ASSERT_LE(tv, 0.02);
}

TEST(oracles, bot_oracle_answers_nothing) {
    Rng rng(qcp_test::kTestSeed);
    auto a = rand_subspace(2, 1, rng);
    auto ops = cp_oracles(a, ClassicalFunction::random(2, 1, rng), ClassicalFunction::random(2, 1, rng));
    auto bot = bot_oracle(*ops.o1);
    ASSERT_EQ(bot.in_bits(), ops.o1->in_bits());
    ASSERT_EQ(bot.flag_sets().size(), 2u);
    for (uint64_t in : {0u, 3u, 5u}) {
        ASSERT_FALSE(bot.answer(in).has_value());
    }
    Mat bm = oracle_matrix(bot);
    ASSERT_LT((bm - Mat::Identity(bm.rows(), bm.cols())).norm(), 1e-15);
    ASSERT_FALSE(bot_oracle(3, 2).answer(7).has_value());
}

TEST(oracles, query_weight_examples) {
    auto s = F2Subspace::span(3, std::vector<uint64_t>{0b101});
    OracleBinding b{{"U", share(membership_oracle(s, "U", "S"))}};
    RegisterLayout l({{"v", 3}, {"y", 1}});
    Circuit c{QueryOp{"U", {"v"}, 0, 0, "y"}};

    Transcript t0;
    Vec psi = QuantumState::basis(l, 0b011 << 1).vector();
    run_circuit(c, psi, l, b, &t0);
    ASSERT_EQ(t0.size(), 1u);
    ASSERT_NEAR(query_weight(t0, "S"), 0, 1e-15);

    Transcript t1;
    psi = QuantumState::basis(l, 0b101 << 1).vector();
    run_circuit(c, psi, l, b, &t1);
    ASSERT_NEAR(query_weight(t1, "S"), 1, 1e-15);

    Transcript t2;
    psi = Vec::Zero(16);
    psi[0b101 << 1] = psi[0b011 << 1] = 1 / std::sqrt(2.0);
    run_circuit(c, psi, l, b, &t2);
    ASSERT_NEAR(query_weight(t2, "S"), 0.5, 1e-15);
    ASSERT_THROW(query_weight(t2, "nope"), std::invalid_argument);

    // Two queries accumulate.
    Transcript t3;
    run_circuit({QueryOp{"U", {"v"}, 0, 0, "y"}, QueryOp{"U", {"v"}, 0, 0, "y"}}, psi, l, b, &t3);
    ASSERT_EQ(t3.size(), 2u);
    ASSERT_NEAR(query_weight(t3, "S"), 1.0, 1e-15);
}

TEST(oracles, weights_add_over_a_partition) {
    Rng rng(qcp_test::kTestSeed);
    auto f = ClassicalFunction::random(16, 1, rng);
    auto o = classical_gate(f, "f");
    std::vector<bool> low(16), high(16), all(16, true);
    for (int i = 0; i < 16; i++) {
        (i < 5 ? low : high)[i] = true;
    }
    o.add_flag_set("low", low);
    o.add_flag_set("high", high);
    o.add_flag_set("all", all);
    RegisterLayout l({{"x", 4}, {"y", 1}});
    Vec psi = qcp_test::random_state(32, rng);
    Transcript t;
    Circuit c{QueryOp{"f", {"x"}, 0, 0, "y"}, HadamardOp{"x"}, QueryOp{"f", {"x"}, 0, 0, "y"}};
    run_circuit(c, psi, l, {{"f", share(o)}}, &t);
    ASSERT_NEAR(query_weight(t, "low") + query_weight(t, "high"), query_weight(t, "all"), 1e-12);
    ASSERT_NEAR(query_weight(t, "all"), 2, 1e-12);
}

TEST(oracles, constant_prefix_selects_the_row) {
    Rng rng(qcp_test::kTestSeed);
    auto a = rand_subspace(2, 1, rng);
    auto f = ClassicalFunction::random(4, 2, rng);
    auto g = ClassicalFunction::random(4, 2, rng);
    auto ops = cp_oracles(a, f, g);
    uint64_t v = a.enumerate()[1];
    RegisterLayout l({{"v", 2}, {"y", 3}});
    for (uint64_t x = 0; x < 4; x++) {
        auto s = QuantumState::basis(l, v << 3);
        s = run_circuit({QueryOp{"O1", {"v"}, x, 2, "y"}}, s, {{"O1", ops.o1}});
        ASSERT_NEAR(outcome_probabilities(s, "y")[4 | (f(x) ^ g(x))], 1, 1e-12);
    }
    ASSERT_THROW(run_circuit({QueryOp{"O1", {"v"}, 0, 1, "y"}}, QuantumState::zeros(l), {{"O1", ops.o1}}),
                 DimensionError);
    ASSERT_THROW(run_circuit({QueryOp{"O2", {"v"}, 0, 2, "y"}}, QuantumState::zeros(l), {{"O1", ops.o1}}),
                 std::invalid_argument);
}

TEST(oracles, halt_before_query) {
    auto o = share(membership_oracle(F2Subspace::full(2), "U", "S"));
    RegisterLayout l({{"v", 2}, {"y", 1}});
    Circuit c{QueryOp{"U", {"v"}, 0, 0, "y"}, XorConstOp{"v", 1}, QueryOp{"U", {"v"}, 0, 0, "y"}};
    Vec psi = QuantumState::basis(l, 0b01 << 1).vector();
    RunOptions opt;
    opt.halt_before = std::make_pair(std::string("U"), uint64_t{1});
    auto r = run_circuit(c, psi, l, {{"U", o}}, nullptr, opt);
    ASSERT_TRUE(r.halted);
    ASSERT_EQ(r.queries["U"], 1u);
    // After one query and the flip, v = 0 and y = 1.
    ASSERT_NEAR(std::norm(psi[0b001]), 1, 1e-15);
    ASSERT_EQ(count_queries(c, "U"), 2u);
}

TEST(oracles, bbbv_modify_trivial_cases) {
    Rng rng(qcp_test::kTestSeed);
    auto f = ClassicalFunction::random(8, 2, rng);
    auto o = classical_gate(f, "f");
    RegisterLayout l({{"x", 3}, {"y", 2}});
    Circuit c{HadamardOp{"x"}, QueryOp{"f", {"x"}, 0, 0, "y"}, HadamardOp{"x"}, QueryOp{"f", {"x"}, 0, 0, "y"}};
    Vec psi = QuantumState::zeros(l).vector();
    OracleBinding b{{"f", share(o)}};
    auto none = bbbv_compare(c, psi, l, b, "f", {});
    ASSERT_NEAR(none.distance, 0, 1e-12);
    ASSERT_EQ(none.queries, 2u);

    std::set<std::pair<uint64_t, uint64_t>> everything;
    for (uint64_t i = 0; i < 2; i++) {
        for (uint64_t y = 0; y < 8; y++) {
            everything.insert({i, y});
        }
    }
    auto mod = bbbv_modify(o, everything);
    Vec a = psi;
    run_circuit(c, a, l, {{"f", share(mod)}});
    // Plain gates encode the replaced answer as 0, the same as an all-zero gate.
    auto zero_gate = classical_gate(ClassicalFunction(std::vector<uint64_t>(8, 0), 2));
    Vec z = psi;
    run_circuit(c, z, l, {{"f", share(zero_gate)}});
    ASSERT_LT((a - z).norm(), 1e-12);
    auto full = bbbv_compare(c, psi, l, b, "f", everything);
    ASSERT_NEAR(full.flagged_weight, 2, 1e-12);
}

TEST(oracles, bbbv_bound_on_random_circuits) {
    Rng rng(qcp_test::kTestSeed);
    for (double eps : {0.1, 0.3}) {
        for (int trial = 0; trial < 20; trial++) {
            unsigned xb = 3 + trial % 3;
            unsigned T = 1 + trial % 8;
            auto f = ClassicalFunction::random(uint64_t{1} << xb, 2, rng);
            RegisterLayout l({{"x", xb}, {"y", 2}});
            Circuit c;
            for (unsigned q = 0; q < T; q++) {
                c.push_back(UnitaryOp{{"x", "y"}, qcp_test::random_unitary(Eigen::Index{1} << (xb + 2), rng)});
                c.push_back(QueryOp{"f", {"x"}, 0, 0, "y"});
            }
            OracleBinding b{{"f", share(classical_gate(f))}};
            Vec psi = QuantumState::zeros(l).vector();
            // Marginals of the honest run pick F with total weight <= eps^2 / T.
            Transcript t;
            t.record_marginals = true;
            Vec probe = psi;
            run_circuit(c, probe, l, b, &t);
            std::vector<std::tuple<double, uint64_t, uint64_t>> cells;
            for (const auto &r : t.records) {
                for (uint64_t y = 0; y < r.input_marginal.size(); y++) {
                    cells.emplace_back(r.input_marginal[y], r.query_index, y);
                }
            }
            std::shuffle(cells.begin(), cells.end(), rng);
            std::set<std::pair<uint64_t, uint64_t>> F;
            double budget = eps * eps / T, used = 0;
            for (const auto &[w, i, y] : cells) {
                if (used + w <= budget) {
                    used += w;
                    F.insert({i, y});
                }
            }
            auto rep = bbbv_compare(c, psi, l, b, "f", F);
            ASSERT_NEAR(rep.flagged_weight, used, 1e-12);
            ASSERT_LE(rep.distance, 2 * eps + 1e-9);
            ASSERT_LE(rep.distance, rep.hybrid_bound + 1e-9);

            // Direct recomputation of the modified run.
            Vec a = psi, m = psi;
            run_circuit(c, a, l, b);
            run_circuit(c, m, l, {{"f", share(bbbv_modify(classical_gate(f), F))}});
            double d = (m - a * a.dot(m)).norm();
            ASSERT_NEAR(d, rep.distance, 1e-9);
        }
    }
}

TEST(oracles, bbbv_phase_kickback_saturates_the_hybrid_bound) {
    // One query with the output in |->: the flagged branch only picks up a
    // sign, and removing the answer undoes it. The distance is
    // 2 sqrt(W (1 - W)), above sqrt(T W) and below 2 sqrt(T W).
    auto f = ClassicalFunction({0, 1}, 1);
    RegisterLayout l({{"x", 1}, {"y", 1}});
    OracleBinding b{{"f", share(classical_gate(f))}};
    Circuit c{QueryOp{"f", {"x"}, 0, 0, "y"}};
    for (double w : {0.01, 0.1, 0.3}) {
        Vec psi = Vec::Zero(4);
        psi[0b00] = std::sqrt(1 - w) / std::sqrt(2.0);
        psi[0b01] = -std::sqrt(1 - w) / std::sqrt(2.0);
        psi[0b10] = std::sqrt(w) / std::sqrt(2.0);
        psi[0b11] = -std::sqrt(w) / std::sqrt(2.0);
        auto rep = bbbv_compare(c, psi, l, b, "f", {{0, 1}});
        ASSERT_NEAR(rep.flagged_weight, w, 1e-12);
        ASSERT_NEAR(rep.distance, 2 * std::sqrt(w * (1 - w)), 1e-12);
        ASSERT_GT(rep.distance, rep.bound);
        ASSERT_LE(rep.distance, rep.hybrid_bound + 1e-12);
    }
}

TEST(oracles, transcript_csv) {
    auto o = share(membership_oracle(F2Subspace::full(1), "U", "S"));
    RegisterLayout l({{"v", 1}, {"y", 1}});
    Vec psi = QuantumState::basis(l, 0b10).vector();
    Transcript t;
    run_circuit({QueryOp{"U", {"v"}, 0, 0, "y"}}, psi, l, {{"U", o}}, &t);
    std::ostringstream out;
    write_transcript_csv(out, t, 7, true);
    ASSERT_EQ(out.str(), "trial,oracle,query_index,flag_set,weight\n7,U,0,S,1\n");
}
