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

#include <gtest/gtest.h>

#include "test_util.h"

using namespace qcp;

namespace {

RegisterLayout qubits(const std::string &name, unsigned n) {
    return RegisterLayout({{name, n}});
}

double expect(const Mat &p, const Vec &v) {
    return (v.adjoint() * p * v)(0, 0).real();
}

// Product of Tr[Pi_i rho] style projections applied in sequence on a pure state.
double sequential_weight(Vec v, const RegisterLayout &l, const std::vector<std::vector<std::string>> &regs,
                         const std::vector<Mat> &ops) {
    for (size_t i = 0; i < ops.size(); i++) {
        v = apply_local(v, l, regs[i], ops[i]);
    }
    return v.squaredNorm();
}

Vec plus_state() {
    Vec v(2);
    v << 1 / std::sqrt(2.0), 1 / std::sqrt(2.0);
    return v;
}

}  // namespace

TEST(measure, table_program_distribution) {
    ClassicalFunction f({3, 1, 2, 0}, 2);
    auto spec = table_program_spec({answer_table(f), {std::nullopt, 0, 0, 0}}, 4, 2);
    Vec v(2);
    v << std::sqrt(0.25), std::sqrt(0.75);
    auto dist = evaluate_distribution(QuantumState::pure(spec.program, v), spec, 0);
    ASSERT_EQ(dist.size(), 2u);
    ASSERT_FALSE(dist[0].first.has_value());
    ASSERT_NEAR(dist[0].second, 0.75, 1e-12);
    ASSERT_EQ(*dist[1].first, 3u);
    ASSERT_NEAR(dist[1].second, 0.25, 1e-12);
    ASSERT_THROW(table_program_spec({{0, 1}}, 4, 2), DimensionError);
}

TEST(measure, goodness_of_table_programs) {
    Rng rng(qcp_test::kTestSeed);
    auto f = ClassicalFunction::random(8, 2, rng);
    auto d = uniform_distribution(8);
    auto perfect = table_program_spec({answer_table(f)}, 8, 2);
    auto p = goodness_povm(perfect, f, d);
    ASSERT_NEAR(expect(p.p(), QuantumState::zeros(perfect.program).vector()), 1, 1e-12);
    // Basis state 1 has no table and answers the invalid symbol.
    ASSERT_NEAR(p.p()(1, 1).real(), 0, 1e-12);

    auto wrong = table_program_spec({answer_table(f ^ ClassicalFunction(std::vector<uint64_t>(8, 1), 2))}, 8, 2);
    ASSERT_NEAR(goodness_povm(wrong, f, d).p().norm(), 0, 1e-12);

    // Correct exactly on the even inputs, under a non-uniform distribution.
    std::vector<uint64_t> half = f.table();
    for (size_t x = 1; x < 8; x += 2) {
        half[x] ^= 2;
    }
    std::vector<double> skew{0.05, 0.2, 0.05, 0.2, 0.15, 0.1, 0.15, 0.1};
    double born = 0;
    for (size_t x = 0; x < 8; x++) {
        born += skew[x] * (half[x] == f(x) ? 1 : 0);
    }
    auto spec = table_program_spec({answer_table(ClassicalFunction(half, 2))}, 8, 2);
    ASSERT_NEAR(expect(goodness_povm(spec, f, skew).p(), QuantumState::zeros(spec.program).vector()), born, 1e-12);
    ASSERT_NEAR(born, 0.4, 1e-12);

    auto uniform_half = goodness_povm(spec, f, d);
    ASSERT_NEAR(expect(uniform_half.p(), QuantumState::zeros(spec.program).vector()), 0.5, 1e-12);
}

TEST(measure, goodness_with_predicates) {
    Rng rng(qcp_test::kTestSeed);
    auto f = ClassicalFunction::random(4, 2, rng);
    auto d = uniform_distribution(4);
    auto other = table_program_spec({answer_table(f ^ ClassicalFunction({1, 1, 1, 1}, 2)), answer_table(f)}, 4, 2);
    auto eq = goodness_povm(other, f, d);
    auto via_pred = goodness_povm_predicate(other, equality_predicate(f, d));
    ASSERT_LT((eq.p() - via_pred.p()).norm(), 1e-12);

    Predicate all{d, [](size_t r) { return static_cast<uint64_t>(r); }, [](size_t, const Decoded &) { return true; }};
    ASSERT_LT((goodness_povm_predicate(other, all).p() - Mat::Identity(2, 2)).norm(), 1e-12);

    // Two valid signatures per input: f(x) and f(x) xor 1.
    Predicate sig{d, [](size_t r) { return static_cast<uint64_t>(r); },
                  [f](size_t r, const Decoded &y) { return y && (*y == f(r) || *y == (f(r) ^ 1)); }};
    Mat ps = goodness_povm_predicate(other, sig).p();
    ASSERT_NEAR(ps(0, 0).real(), 1, 1e-12);
    ASSERT_NEAR(eq.p()(0, 0).real(), 0, 1e-12);
    ASSERT_NEAR(eq.p()(1, 1).real(), 1, 1e-12);
}

TEST(measure, povm_validation) {
    Mat nh(2, 2);
    nh << 0.5, 0.1, 0.0, 0.5;
    ASSERT_THROW(BinaryPovm{nh}, std::invalid_argument);
    ASSERT_THROW(BinaryPovm{Mat(1.5 * Mat::Identity(2, 2))}, std::invalid_argument);
    ASSERT_THROW(BinaryPovm{Mat(-0.1 * Mat::Identity(2, 2))}, std::invalid_argument);
    ASSERT_NO_THROW(BinaryPovm{Mat(Mat::Identity(2, 2) * (1 + 1e-12))});
}

TEST(measure, proj_impl_examples) {
    Rng rng(qcp_test::kTestSeed);
    Mat proj = qcp_test::random_projector(8, 3, rng);
    auto pi = proj_impl(BinaryPovm(proj));
    ASSERT_EQ(pi.values.size(), 2u);
    ASSERT_NEAR(pi.values[0], 1, 1e-9);
    ASSERT_NEAR(pi.values[1], 0, 1e-9);
    ASSERT_LT((pi.projectors[0] - proj).norm(), 1e-9);

    auto scalar = proj_impl(BinaryPovm(Mat(0.3 * Mat::Identity(2, 2))));
    ASSERT_EQ(scalar.values.size(), 1u);
    ASSERT_NEAR(scalar.values[0], 0.3, 1e-12);
    ASSERT_LT((scalar.projectors[0] - Mat::Identity(2, 2)).norm(), 1e-12);

    for (Eigen::Index dim : {2, 5, 16, 64}) {
        Mat p = qcp_test::random_contraction(dim, rng);
        auto r = proj_impl(BinaryPovm(p));
        ASSERT_LT((r.reconstruct() - p).norm(), 1e-8);
        Mat sum = Mat::Zero(dim, dim);
        for (size_t i = 0; i < r.values.size(); i++) {
            sum += r.projectors[i];
            if (i > 0) {
                ASSERT_GT(r.values[i - 1], r.values[i]);
            }
            for (size_t j = i + 1; j < r.values.size(); j++) {
                ASSERT_LT((r.projectors[i] * r.projectors[j]).norm(), 1e-8);
            }
        }
        ASSERT_LT((sum - Mat::Identity(dim, dim)).norm(), 1e-8);
    }
}

TEST(measure, apply_proj_impl_statistics) {
    Rng rng(qcp_test::kTestSeed);
    Mat p = qcp_test::random_contraction(4, rng);
    auto pi = proj_impl(BinaryPovm(p));
    auto l = qubits("r", 2);

    // Eigenstate: its eigenvalue, with certainty, state unchanged.
    Eigen::SelfAdjointEigenSolver<Mat> es(p);
    Vec eig = es.eigenvectors().col(2);
    auto out = apply_proj_impl(pi, QuantumState::pure(l, eig), rng);
    ASSERT_NEAR(out.p, es.eigenvalues()[2], 1e-9);
    ASSERT_NEAR(out.prob, 1, 1e-9);
    ASSERT_NEAR(std::abs(out.post.vector().dot(eig)), 1, 1e-9);

    Mat rho = qcp_test::random_density(4, 2, rng);
    auto s = QuantumState::mixed(l, rho);
    double trace = (p * rho).trace().real();
    const int shots = 10000;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < shots; i++) {
        auto o = apply_proj_impl(pi, s, rng);
        sum += o.p;
        sum2 += o.p * o.p;
        if (i < 200) {
            auto again = apply_proj_impl(pi, o.post, rng);
            ASSERT_EQ(again.index, o.index);
        }
    }
    double mean = sum / shots;
    double sigma = std::sqrt((sum2 / shots - mean * mean) / shots);
    ASSERT_LE(std::abs(mean - trace), 3 * sigma);
}

TEST(measure, threshold_impl_examples) {
    Rng rng(qcp_test::kTestSeed);
    Mat p = qcp_test::random_contraction(8, rng) * 0.99;
    auto pi = proj_impl(BinaryPovm(p));
    ASSERT_LT((threshold_impl(pi, 0) - Mat::Identity(8, 8)).norm(), 1e-12);
    ASSERT_LT(threshold_impl(pi, 1 + 1e-7).norm(), 1e-12);
    ASSERT_THROW(threshold_impl(pi, -0.1), std::invalid_argument);

    Vec v = qcp_test::random_state(8, rng);
    double prev = 2;
    for (double g = 0; g <= 1; g += 0.05) {
        Mat ti = threshold_impl(pi, g);
        ASSERT_TRUE(is_projector(ti));
        double w = expect(ti, v);
        ASSERT_LE(w, prev + 1e-12);
        prev = w;
    }

    // Exact eigenvalue 1/2 sits on the accepting side.
    Mat half = Mat::Zero(2, 2);
    half(0, 0) = 0.5;
    ASSERT_NEAR(threshold_impl(proj_impl(BinaryPovm(half)), 0.5)(0, 0).real(), 1, 1e-12);

    // Two-program toy: basis 1 is the working program, basis 0 the dummy.
    ClassicalFunction f({1, 0, 3, 2}, 2);
    auto spec = table_program_spec({{std::nullopt, std::nullopt, std::nullopt, std::nullopt}, answer_table(f)}, 4, 2);
    Mat ti = threshold_impl(proj_impl(goodness_povm(spec, f, uniform_distribution(4))), 0.5);
    Mat pp = Mat::Zero(2, 2);
    pp(1, 1) = 1;
    ASSERT_LT((ti - pp).norm(), 1e-12);
}

TEST(measure, threshold_outcome_is_repeatable) {
    Rng rng(qcp_test::kTestSeed);
    Mat ti = threshold_impl(proj_impl(BinaryPovm(qcp_test::random_contraction(8, rng))), 0.4);
    auto l = qubits("r", 3);
    for (int trial = 0; trial < 50; trial++) {
        auto s = QuantumState::pure(l, qcp_test::random_state(8, rng));
        Vec in = ti * s.vector();
        if (in.squaredNorm() < 1e-9) {
            continue;
        }
        ASSERT_NEAR(expect(ti, in.normalized()), 1, 1e-9);
    }
}

TEST(measure, joint_threshold_examples) {
    Rng rng(qcp_test::kTestSeed);
    ClassicalFunction f({1, 0, 3, 2}, 2);
    std::vector<Decoded> dummy(4, std::nullopt);
    auto r1 = table_program_spec({dummy, answer_table(f)}, 4, 2, "a_");
    auto r2 = table_program_spec({dummy, answer_table(f)}, 4, 2, "b_");
    auto p1 = goodness_povm(r1, f, uniform_distribution(4));
    auto p2 = goodness_povm(r2, f, uniform_distribution(4));
    auto l = r1.program + r2.program;

    // |P>|P>.
    PirateOutput both{QuantumState::basis(l, 0b11), r1, r2};
    auto res = joint_threshold_measure(both, p1, p2, 0.5, rng);
    ASSERT_EQ(res.b1, 0);
    ASSERT_EQ(res.b2, 0);
    ASSERT_NEAR(res.both_good_prob, 1, 1e-12);

    // Swap superposition of |P>|D> and |D>|P>.
    Vec swap = Vec::Zero(4);
    swap[0b10] = swap[0b01] = 1 / std::sqrt(2.0);
    for (double g : {0.51, 0.75, 1.0}) {
        auto r = joint_threshold_measure(PirateOutput{QuantumState::pure(l, swap), r1, r2}, p1, p2, g, rng);
        ASSERT_NEAR(r.both_good_prob, 0, 1e-12);
        ASSERT_FALSE(r.b1 == 0 && r.b2 == 0);
    }

    // sqrt(1/3)|PP> + sqrt(2/3)|DD>.
    Vec corr = Vec::Zero(4);
    corr[0b11] = std::sqrt(1.0 / 3);
    corr[0b00] = std::sqrt(2.0 / 3);
    int hits = 0;
    const int shots = 3000;
    for (double g : {0.1, 0.5, 1.0}) {
        auto r = joint_threshold_measure(PirateOutput{QuantumState::pure(l, corr), r1, r2}, p1, p2, g, rng);
        ASSERT_NEAR(r.both_good_prob, 1.0 / 3, 1e-12);
    }
    for (int i = 0; i < shots; i++) {
        auto r = joint_threshold_measure(PirateOutput{QuantumState::pure(l, corr), r1, r2}, p1, p2, 0.5, rng);
        if (r.b1 == 0 && r.b2 == 0) {
            hits++;
            ASSERT_NEAR(r.post.vector().squaredNorm(), 1, 1e-12);
            ASSERT_NEAR(std::norm(r.post.vector()[0b11]), 1, 1e-12);
        }
    }
    double sigma = std::sqrt((1.0 / 3) * (2.0 / 3) / shots);
    ASSERT_LE(std::abs(hits / double(shots) - 1.0 / 3), 3 * sigma);
}

TEST(measure, joint_threshold_commutes_on_entangled_states) {
    Rng rng(qcp_test::kTestSeed);
    RegisterLayout l({{"a", 2}, {"b", 2}});
    for (int trial = 0; trial < 10; trial++) {
        Mat t1 = threshold_impl(proj_impl(BinaryPovm(qcp_test::random_contraction(4, rng))), 0.5);
        Mat t2 = threshold_impl(proj_impl(BinaryPovm(qcp_test::random_contraction(4, rng))), 0.5);
        Vec v = qcp_test::random_state(16, rng);
        auto s = QuantumState::pure(l, v);
        double joint = expect(qcp_test::kron(t1, t2), v);
        double ab = sequential_weight(v, l, {{"a"}, {"b"}}, {t1, t2});
        double ba = sequential_weight(v, l, {{"b"}, {"a"}}, {t2, t1});
        ASSERT_NEAR(joint, ab, 1e-9);
        ASSERT_NEAR(joint, ba, 1e-9);
        ASSERT_NEAR(joint_good_probability(s, {"a"}, t1, {"b"}, t2), joint, 1e-9);
        auto r = joint_threshold_measure(s, {"a"}, t1, {"b"}, t2, rng);
        if (r.b1 == 0 && r.b2 == 0) {
            ASSERT_NEAR(expect(qcp_test::kron(t1, t2), r.post.vector()), 1, 1e-9);
        }
        // Mixed input through the density route.
        auto mixed = QuantumState::mixed(l, qcp_test::random_density(16, 3, rng));
        double trace = (qcp_test::kron(t1, t2) * mixed.matrix()).trace().real();
        ASSERT_NEAR(joint_good_probability(mixed, {"a"}, t1, {"b"}, t2), trace, 1e-9);
    }
    ASSERT_THROW(joint_threshold_measure(QuantumState::zeros(l), {"a"}, Mat::Identity(4, 4), {"a"},
                                         Mat::Identity(4, 4), rng),
                 std::invalid_argument);
}

TEST(measure, controlled_projection_forms_agree) {
    Rng rng(qcp_test::kTestSeed);
    Mat p0 = qcp_test::random_projector(4, 2, rng);
    Mat p1 = qcp_test::random_projector(4, 1, rng);
    auto single = controlled_projection({p0}, {1.0});
    ASSERT_LT((single.mixture().p() - p0).norm(), 1e-12);

    auto cp = controlled_projection({p0, p1}, {0.5, 0.5});
    Vec v = qcp_test::random_state(4, rng);
    double trace = expect(cp.mixture().p(), v);
    ASSERT_NEAR(trace, 0.5 * expect(p0, v) + 0.5 * expect(p1, v), 1e-12);

    auto skew = controlled_projection({p0, p1}, {0.3, 0.7});
    double t2 = expect(skew.mixture().p(), v);
    auto s = QuantumState::pure(qubits("r", 2), v);
    const int shots = 10000;
    int acc = 0;
    for (int i = 0; i < shots; i++) {
        acc += measure_controlled(skew, s, rng) == 0 ? 1 : 0;
    }
    double sigma = std::sqrt(t2 * (1 - t2) / shots);
    ASSERT_LE(std::abs(acc / double(shots) - t2), 3 * sigma);

    ASSERT_THROW(controlled_projection({p0}, {0.5, 0.5}), std::invalid_argument);
    ASSERT_THROW(controlled_projection({Mat(0.5 * Mat::Identity(4, 4))}, {1.0}), std::invalid_argument);
    std::vector<Mat> big(1 << 11, p0);
    ASSERT_THROW(controlled_projection(big, uniform_distribution(1 << 11)), ResourceError);
}

TEST(measure, controlled_projection_of_program_matches_goodness) {
    Rng rng(qcp_test::kTestSeed);
    auto f = ClassicalFunction::random(4, 2, rng);
    auto g = ClassicalFunction::random(4, 2, rng);
    auto spec = table_program_spec({answer_table(f), answer_table(g)}, 4, 2);
    auto d = std::vector<double>{0.1, 0.2, 0.3, 0.4};
    auto cp = controlled_projection(spec, equality_predicate(f, d));
    ASSERT_LT((cp.mixture().p() - goodness_povm(spec, f, d).p()).norm(), 1e-12);
}

TEST(measure, shift_distance_examples) {
    ScalarDistribution a{{0.1, 0.4, 0.9}, {0.2, 0.5, 0.3}};
    for (double eps : {0.0, 0.1, 0.7}) {
        ASSERT_EQ(shift_distance(a, a, eps), 0);
    }
    ASSERT_EQ(shift_distance(ScalarDistribution::point(0.5), ScalarDistribution::point(0.6), 0.1), 0);
    ASSERT_EQ(shift_distance(ScalarDistribution::point(0), ScalarDistribution::point(1), 0.5), 1);
    ASSERT_NEAR(shift_distance(ScalarDistribution::point(0), ScalarDistribution{{0, 1}, {0.75, 0.25}}, 0.5), 0.25,
                1e-12);
    ASSERT_THROW(shift_distance(a, a, -1), std::invalid_argument);
    auto e = ScalarDistribution::empirical({0.5, 0.25, 0.5, 0.5});
    ASSERT_EQ(e.values, (std::vector<double>{0.25, 0.5}));
    ASSERT_EQ(e.probs, (std::vector<double>{0.25, 0.75}));
}

TEST(measure, shift_distance_matches_brute_force) {
    // Brute-force definition: scan a fine grid of x for both CDF inequalities.
    Rng rng(qcp_test::kTestSeed);
    auto cdf = [](const ScalarDistribution &d, double x) {
        double s = 0;
        for (size_t i = 0; i < d.values.size(); i++) {
            s += d.values[i] <= x + 1e-12 ? d.probs[i] : 0;
        }
        return s;
    };
    for (int trial = 0; trial < 30; trial++) {
        ScalarDistribution d0, d1;
        for (auto *d : {&d0, &d1}) {
            int k = 1 + static_cast<int>(uniform_below(rng, 4));
            std::vector<double> w;
            for (int i = 0; i < k; i++) {
                d->values.push_back(static_cast<double>(uniform_below(rng, 21)) / 20);
                w.push_back(1 + static_cast<double>(uniform_below(rng, 5)));
            }
            double total = 0;
            for (double x : w) total += x;
            for (double x : w) d->probs.push_back(x / total);
        }
        double eps = static_cast<double>(uniform_below(rng, 5)) / 20;
        double worst = 0;
        for (int i = -40; i <= 60; i++) {
            double x = i / 40.0;
            worst = std::max(worst, cdf(d0, x) - cdf(d1, x + eps));
            worst = std::max(worst, cdf(d1, x) - cdf(d0, x + eps));
        }
        ASSERT_NEAR(shift_distance(d0, d1, eps), worst, 1e-12);
    }
}

TEST(measure, sampled_api_on_eigenstates) {
    Rng rng(qcp_test::kTestSeed);
    auto l = qubits("r", 1);
    Mat p = Mat::Zero(2, 2);
    p(0, 0) = 1;
    p(1, 1) = 0.3;
    auto pi = proj_impl(BinaryPovm(p));
    auto one = sampled_api(QuantumState::basis(l, 0), {"r"}, pi, 0.1, 0.05, rng);
    ASSERT_EQ(one.estimate, 1.0);
    ASSERT_TRUE(one.restored);
    ASSERT_NEAR(std::norm(one.post.vector()[0]), 1, 1e-12);
    ASSERT_EQ(one.rounds, api_rounds(0.1, 0.05));
    ASSERT_EQ(one.rounds, 738u);

    int close = 0;
    const int runs = 200;
    for (int i = 0; i < runs; i++) {
        auto r = sampled_api(QuantumState::basis(l, 1), {"r"}, pi, 0.1, 0.05, rng);
        close += std::abs(r.estimate - 0.3) <= 0.1 ? 1 : 0;
        ASSERT_NEAR(std::norm(r.post.vector()[1]), 1, 1e-12);
    }
    ASSERT_GE(close / double(runs), 0.95 - 3 * std::sqrt(0.05 * 0.95 / runs));
}

TEST(measure, sampled_api_almost_projective) {
    Rng rng(qcp_test::kTestSeed);
    auto l = qubits("r", 3);
    const int states = 50;
    int ok = 0;
    for (int i = 0; i < states; i++) {
        auto pi = proj_impl(BinaryPovm(qcp_test::random_contraction(8, rng)));
        auto s = QuantumState::pure(l, qcp_test::random_state(8, rng));
        auto a = sampled_api(s, {"r"}, pi, 0.1, 0.05, rng);
        auto b = sampled_api(a.post, {"r"}, pi, 0.1, 0.05, rng);
        ok += std::abs(a.estimate - b.estimate) <= 0.1 ? 1 : 0;
    }
    ASSERT_GE(ok / double(states), 0.95 - 3 * std::sqrt(0.05 * 0.95 / states));
}

TEST(measure, sampled_api_shift_distance_to_exact) {
    Rng rng(qcp_test::kTestSeed);
    auto l = qubits("r", 2);
    Mat p = qcp_test::random_contraction(4, rng);
    auto pi = proj_impl(BinaryPovm(p));
    auto s = QuantumState::pure(l, qcp_test::random_state(4, rng));
    ScalarDistribution exact;
    for (size_t i = 0; i < pi.values.size(); i++) {
        exact.values.push_back(pi.values[i]);
        exact.probs.push_back(expect(pi.projectors[i], s.vector()));
    }
    std::vector<double> est;
    const int runs = 400;
    for (int i = 0; i < runs; i++) {
        est.push_back(sampled_api(s, {"r"}, pi, 0.1, 0.05, rng).estimate);
    }
    double d = shift_distance(ScalarDistribution::empirical(est), exact, 0.1);
    ASSERT_LE(d, 0.05 + 3 * std::sqrt(0.05 * 0.95 / runs));
}

TEST(measure, sampled_api_explicit_backend_agrees) {
    Rng rng(qcp_test::kTestSeed);
    auto l = qubits("r", 2);
    Mat p0 = qcp_test::random_projector(4, 2, rng);
    Mat p1 = qcp_test::random_projector(4, 3, rng);
    auto cp = controlled_projection({p0, p1}, {0.5, 0.5});
    auto pi = proj_impl(cp.mixture());
    auto s = QuantumState::pure(l, qcp_test::random_state(4, rng));
    ApiOptions ex;
    ex.backend = ApiBackend::Explicit;
    const int runs = 100;
    double mean_spec = 0, mean_ex = 0;
    int consistent = 0;
    for (int i = 0; i < runs; i++) {
        mean_spec += sampled_api(s, {"r"}, cp, 0.1, 0.05, rng).estimate / runs;
        auto a = sampled_api(s, {"r"}, cp, 0.1, 0.05, rng, ex);
        mean_ex += a.estimate / runs;
        ASSERT_TRUE(a.restored);
        auto b = sampled_api(a.post, {"r"}, cp, 0.1, 0.05, rng, ex);
        consistent += std::abs(a.estimate - b.estimate) <= 0.1 ? 1 : 0;
    }
    // Both are unbiased-ish for Tr[P rho] up to the eps resolution.
    double trace = expect(cp.mixture().p(), s.vector());
    ASSERT_NEAR(mean_spec, trace, 0.05);
    ASSERT_NEAR(mean_ex, trace, 0.05);
    ASSERT_GE(consistent, 90);
}

TEST(measure, fresh_coin_backend_is_not_projective) {
    // {|0><0|, |+><+|} with fair coins: the mixture has eigenvalues
    // (2 +- sqrt 2) / 4, but independent coins drive every run toward 1/2.
    Rng rng(qcp_test::kTestSeed);
    auto l = qubits("r", 1);
    Mat z = Mat::Zero(2, 2);
    z(0, 0) = 1;
    Mat plus = qcp_test::outer(plus_state());
    auto cp = controlled_projection({z, plus}, {0.5, 0.5});
    Eigen::SelfAdjointEigenSolver<Mat> es(cp.mixture().p());
    double top = es.eigenvalues()[1];
    ASSERT_NEAR(top, (2 + std::sqrt(2.0)) / 4, 1e-12);
    auto eig = QuantumState::pure(l, es.eigenvectors().col(1));
    ApiOptions fresh;
    fresh.backend = ApiBackend::FreshCoin;
    int fresh_close = 0, spec_close = 0;
    for (int i = 0; i < 50; i++) {
        fresh_close += std::abs(sampled_api(eig, {"r"}, cp, 0.1, 0.05, rng, fresh).estimate - top) <= 0.1;
        spec_close += std::abs(sampled_api(eig, {"r"}, cp, 0.1, 0.05, rng).estimate - top) <= 0.1;
    }
    ASSERT_LE(fresh_close, 5);
    ASSERT_GE(spec_close, 45);
}

TEST(measure, approximate_threshold_contract) {
    // ATI_{gamma - eps} accepts at least Tr[TI_gamma rho] - delta, and its
    // accepted post-states sit in TI_{gamma - 2 eps} up to 2 delta.
    Rng rng(qcp_test::kTestSeed);
    const double eps = 0.1, delta = 0.05, gamma = 0.6;
    auto l = qubits("r", 2);
    auto pi = proj_impl(BinaryPovm(qcp_test::random_contraction(4, rng)));
    Mat ti = threshold_impl(pi, gamma);
    Mat ti_low = threshold_impl(pi, gamma - 2 * eps);
    auto s = QuantumState::pure(l, qcp_test::random_state(4, rng));
    const int runs = 400;
    int accepted = 0;
    double post_weight = 0;
    for (int i = 0; i < runs; i++) {
        auto r = sampled_api(s, {"r"}, pi, eps, delta, rng);
        if (r.estimate >= gamma - eps) {
            accepted++;
            post_weight += expect(ti_low, r.post.vector());
        }
    }
    double rate = accepted / double(runs);
    double target = expect(ti, s.vector()) - delta;
    ASSERT_GE(rate, target - 3 * std::sqrt(0.25 / runs));
    ASSERT_GE(post_weight / accepted, 1 - 2 * delta - 3 * std::sqrt(0.25 / accepted));
}

TEST(measure, tripartite_approximate_threshold) {
    // Three parties with two qubits each; Bell pairs link neighbours in a ring.
    Rng rng(qcp_test::kTestSeed);
    const double eps = 0.1, delta = 0.05, gamma = 0.5;
    RegisterLayout l({{"a0", 1}, {"b0", 1}, {"a1", 1}, {"b1", 1}, {"a2", 1}, {"b2", 1}});
    Vec psi = Vec::Zero(64);
    for (uint64_t i = 0; i < 64; i++) {
        // Bell pairs (b0, a1), (b1, a2), (b2, a0).
        int b0 = (i >> 4) & 1, a1 = (i >> 3) & 1, b1 = (i >> 2) & 1, a2 = (i >> 1) & 1;
        int b2 = i & 1, a0 = (i >> 5) & 1;
        if (b0 == a1 && b1 == a2 && b2 == a0) {
            psi[static_cast<Eigen::Index>(i)] = 1 / std::sqrt(8.0);
        }
    }
    auto s = QuantumState::pure(l, psi);
    std::vector<std::vector<std::string>> regs{{"a0", "b0"}, {"a1", "b1"}, {"a2", "b2"}};
    std::vector<ProjectiveImplementation> pis;
    std::vector<Mat> ti, ti_low;
    for (int k = 0; k < 3; k++) {
        pis.push_back(proj_impl(BinaryPovm(qcp_test::random_contraction(4, rng))));
        ti.push_back(threshold_impl(pis.back(), gamma));
        ti_low.push_back(threshold_impl(pis.back(), gamma - 2 * eps));
    }
    double exact = sequential_weight(psi, l, regs, ti);
    const int runs = 300;
    int all = 0;
    double post = 0;
    for (int i = 0; i < runs; i++) {
        QuantumState cur = s;
        bool ok = true;
        for (int k = 0; k < 3 && ok; k++) {
            auto r = sampled_api(cur, regs[k], pis[k], eps, delta, rng);
            ok = r.estimate >= gamma - eps;
            cur = r.post;
        }
        if (ok) {
            all++;
            post += sequential_weight(cur.vector(), l, regs, ti_low);
        }
    }
    ASSERT_GE(all / double(runs), exact - 3 * delta - 3 * std::sqrt(0.25 / runs));
    ASSERT_GT(all, 0);
    ASSERT_GE(post / all, 1 - 6 * delta - 3 * std::sqrt(0.25 / all));
}

TEST(measure, report_json) {
    auto j = measurement_report(0.5, 0.25, 0, 0);
    ASSERT_EQ(j["gamma"], 0.5);
    ASSERT_EQ(j["trace"], 0.25);
    ASSERT_TRUE(j["ci95"].is_null());
    auto k = measurement_report(0.5, std::nullopt, 100, 50);
    ASSERT_TRUE(k["trace"].is_null());
    ASSERT_LT(k["ci95"][0].get<double>(), 0.5);
    ASSERT_GT(k["ci95"][1].get<double>(), 0.5);
}
