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

#include "qcp/money.h"

#include <gtest/gtest.h>

#include <set>

using namespace qcp;

namespace {

double three_sigma(double p, uint64_t n) {
    return 3 * std::sqrt(std::max(p * (1 - p), 1e-4) / static_cast<double>(n));
}

MoneyConfig small_money(const std::string &adversary, uint64_t trials) {
    MoneyConfig cfg;
    cfg.lambda = 4;
    cfg.trials = trials;
    cfg.adversary = adversary;
    cfg.seed = 5;
    return cfg;
}

}  // namespace

TEST(money, pke_decrypts_every_message) {
    Rng rng(1);
    PkeKeys keys = toy_pke_keygen(8, 8, rng);
    std::set<uint64_t> ciphertexts;
    for (uint64_t m = 0; m < 8; m++) {
        for (uint64_t r = 0; r < 8; r++) {
            uint64_t c = keys.pk.encrypt(m, r);
            ciphertexts.insert(c);
            EXPECT_EQ(keys.sk.decrypt(c), m);
            EXPECT_EQ(keys.sk.dec_function()(c), m);
        }
    }
    EXPECT_EQ(ciphertexts.size(), 64u);
    EXPECT_THROW(toy_pke_keygen(6, 8, rng), DimensionError);
}

TEST(money, predicate_operator_equals_uniform_equality) {
    // Enc is a bijection, so (m, r) uniform makes the ciphertext uniform and
    // the decryption predicate is output equality with Dec.
    Rng rng(2);
    PkeKeys keys = toy_pke_keygen(4, 2, rng);
    ClassicalFunction dec = keys.sk.dec_function();
    std::vector<uint64_t> noisy = dec.table();
    noisy[3] ^= 1;
    ProgramSpec spec = table_program_spec({answer_table(dec), answer_table(ClassicalFunction(noisy, 2))}, 8, 2);
    Mat a = goodness_povm_predicate(spec, pke_predicate(keys.pk)).p();
    Mat b = goodness_povm_predicate(spec, equality_predicate(dec, uniform_distribution(8))).p();
    EXPECT_TRUE(a.isApprox(b, 1e-12));
}

TEST(money, honest_note_verifies) {
    MoneyScheme scheme({6, 8, 8});
    Rng rng(3);
    for (int t = 0; t < 100; t++) {
        MoneyKeys keys = money_keygen(scheme, rng);
        SubspaceMoney bank = scheme.new_bank();
        CdProgram note = money_gennote(scheme, keys, bank, rng);
        QuantumState s = QuantumState::pure(RegisterLayout({{"n", 6}}), note.note.state.vector());
        MoneyVerifyResult v =
            money_verify(scheme, keys.pke_pk, keys.cd_pk, bank, {note.circuit, note.note.serial, "n"}, s, 0.9, 16,
                         "exact", rng);
        ASSERT_TRUE(v.accept) << v.check.reason;
    }
}

TEST(money, garbage_notes_are_rejected) {
    MoneyScheme scheme({4, 8, 8});
    Rng rng(4);
    MoneyKeys keys = money_keygen(scheme, rng);
    SubspaceMoney bank = scheme.new_bank();
    CdProgram note = money_gennote(scheme, keys, bank, rng);
    QuantumState s = QuantumState::pure(RegisterLayout({{"n", 4}}), note.note.state.vector());

    // A random table carrying the right mark fails decryption.
    ClassicalFunction junk = ClassicalFunction::random(64, 3, rng);
    ClassicalFunction marked = scheme.wm().mark(keys.cd_sk, junk, note.note.serial);
    MoneyVerifyResult v =
        money_verify(scheme, keys.pke_pk, keys.cd_pk, bank, {marked, note.note.serial, "n"}, s, 0.9, 16, "exact", rng);
    EXPECT_TRUE(v.check.bit == 0);
    EXPECT_FALSE(v.accept);

    // Wrong serial, wrong shape.
    v = money_verify(scheme, keys.pke_pk, keys.cd_pk, bank, {note.circuit, note.note.serial ^ 1, "n"}, s, 0.9, 16,
                     "exact", rng);
    EXPECT_FALSE(v.accept);
    v = money_verify(scheme, keys.pke_pk, keys.cd_pk, bank, {ClassicalFunction(std::vector<uint64_t>(8, 0), 3),
                                                              note.note.serial, "n"},
                     s, 0.9, 16, "exact", rng);
    EXPECT_FALSE(v.accept);
    EXPECT_EQ(v.check.reason, "malformed circuit");
}

TEST(money, sampled_test_matches_binomial) {
    // A marked Dec agrees on 60 of 64 ciphertexts unless the mark collides.
    MoneyConfig cfg = small_money("honest", 1500);
    cfg.measurement = "sampled";
    GameReport r = run_money_game(cfg);
    double p = 60.0 / 64;
    double lo = std::pow(p, 16) + 16 * std::pow(p, 15) * (1 - p);
    EXPECT_GE(r.win_rate(), lo - three_sigma(lo, cfg.trials));
    EXPECT_LT(r.win_rate(), 0.9);
    EXPECT_FALSE(r.diagnostics["reduction_checked"].get<bool>());
}

TEST(money, honest_game_accepts) {
    MoneyConfig cfg = small_money("honest", 200);
    GameReport r = run_money_game(cfg);
    EXPECT_EQ(r.wins, cfg.trials);
    EXPECT_NEAR(*r.derived_expectation, 1.0, 1e-12);
    EXPECT_NEAR(*r.exact_mean(), 1.0, 1e-9);
    EXPECT_EQ(r.diagnostics["reduction_mismatches"].get<uint64_t>(), 0u);
}

TEST(money, cloned_note_is_bounded_and_reduction_agrees) {
    MoneyConfig cfg = small_money("duplicate-everything", 1500);
    GameReport r = run_money_game(cfg);
    double target = 1.0 / 16;
    EXPECT_NEAR(r.win_rate(), target, three_sigma(target, cfg.trials));
    EXPECT_LE(r.win_rate(), 0.25 + three_sigma(0.25, cfg.trials));
    EXPECT_NEAR(*r.exact_mean(), target, 1e-9);
    EXPECT_EQ(r.diagnostics["reduction_mismatches"].get<uint64_t>(), 0u);
}

TEST(money, other_counterfeiters_lose) {
    for (const char *name : {"mark-eraser", "honest-plus-dummy"}) {
        GameReport r = run_money_game(small_money(name, 100));
        EXPECT_EQ(r.wins, 0u) << name;
        EXPECT_EQ(r.diagnostics["reduction_mismatches"].get<uint64_t>(), 0u);
    }
}

TEST(money, config_validation) {
    MoneyConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    cfg.msg_space = 6;
    EXPECT_THROW(cfg.validate(), DimensionError);
    cfg = MoneyConfig{};
    cfg.measurement = "guess";
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = MoneyConfig{};
    cfg.adversary = "duplicate-everything";
    cfg.lambda = 12;
    EXPECT_THROW(cfg.validate(), ResourceError);
    cfg.adversary = "nobody";
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
}
