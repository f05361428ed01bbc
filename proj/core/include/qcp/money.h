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

// Public-key quantum money from copy detection: a banknote is a
// copy-detection program for the decryption function of a public-key
// encryption scheme, and verification checks it with the copy-detection
// Check and then tests that it decrypts.

#ifndef QCP_MONEY_H
#define QCP_MONEY_H

#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "qcp/cd.h"

namespace qcp {

// ---------------------------------------------------------------------------
// Toy public-key encryption: Enc is a random bijection M x R -> C.

struct PkePublicKey {
    uint64_t msg_space = 0;
    uint64_t rand_space = 0;
    /// enc[m * rand_space + r] is the ciphertext of m under coins r.
    std::vector<uint64_t> enc;

    uint64_t encrypt(uint64_t m, uint64_t r) const;
    uint64_t ciphertext_space() const { return msg_space * rand_space; }
    nlohmann::json to_json() const;
};

struct PkeSecretKey {
    /// dec[c] is the message of ciphertext c.
    std::vector<uint64_t> dec;
    unsigned msg_bits = 0;

    uint64_t decrypt(uint64_t c) const;
    /// Dec(sk, .) as a classical circuit [C] -> [2^msg_bits].
    ClassicalFunction dec_function() const;
};

struct PkeKeys {
    PkePublicKey pk;
    PkeSecretKey sk;
};

/// msg_space must be a power of two.
PkeKeys toy_pke_keygen(uint64_t msg_space, uint64_t rand_space, Rng &rng);

/// Decryption predicate: (m, r) uniform, input Enc(pk, m; r), accept y = m.
Predicate pke_predicate(const PkePublicKey &pk);

// ---------------------------------------------------------------------------
// Money scheme

struct MoneyParams {
    unsigned lambda = 8;
    uint64_t msg_space = 8;
    uint64_t rand_space = 8;
};

struct MoneyKeys {
    PkePublicKey pke_pk;
    WmPublicKey cd_pk;
    PkeSecretKey pke_sk;
    WmMarkKey cd_sk;
};

/// Holds the watermarking scheme over Dec's shape. Serials live in [1, msg_space).
class MoneyScheme {
   public:
    explicit MoneyScheme(MoneyParams params);

    const MoneyParams &params() const { return params_; }
    const ToyWatermark &wm() const { return wm_; }
    /// An empty registry for this scheme's notes.
    SubspaceMoney new_bank() const { return SubspaceMoney(params_.lambda, params_.msg_space); }

   private:
    MoneyParams params_;
    ToyWatermark wm_;
};

MoneyKeys money_keygen(const MoneyScheme &scheme, Rng &rng);

/// The public auxiliary information of f = Dec(sk, .).
nlohmann::json money_aux(const PkePublicKey &pk);

/// A banknote: Generate of the copy-detection scheme on Dec(sk, .).
CdProgram money_gennote(const MoneyScheme &scheme, const MoneyKeys &keys, SubspaceMoney &bank, Rng &rng);

struct MoneyVerifyResult {
    bool accept = false;
    CheckResult check;
    /// Outcome of the decryption test; unset when Check already rejected.
    std::optional<bool> good;
    /// Correct answers and challenges of a sampled decryption test.
    uint64_t correct = 0;
    uint64_t challenges = 0;
};

/// Check, then the decryption test at threshold gamma: exact (the threshold
/// projector on the circuit) or sampled (k fresh (m, r) challenges, accept
/// when at least ceil(gamma k) decrypt correctly).
MoneyVerifyResult money_verify(const MoneyScheme &scheme, const PkePublicKey &pke_pk, const WmPublicKey &cd_pk,
                               const SubspaceMoney &bank, const ClaimedProgram &note, const QuantumState &notes,
                               double gamma, uint64_t k, const std::string &measurement, Rng &rng);

// ---------------------------------------------------------------------------
// Counterfeiting game

struct MoneyConfig {
    unsigned lambda = 8;
    uint64_t msg_space = 8;
    uint64_t rand_space = 8;
    double gamma = 0.9;
    uint64_t k = 16;
    /// "exact" or "sampled".
    std::string measurement = "exact";
    uint64_t trials = 1000;
    uint64_t seed = 1;
    /// "honest" or a copy-detection pirate name.
    std::string adversary = "honest";
    unsigned threads = 0;
    bool per_trial = true;

    void validate() const;
    nlohmann::json to_json() const;
};

/// Honest: one note, win = it verifies. Pirates: one note in, two out, win =
/// both verify. In exact mode every trial is also judged through the
/// copy-detection judge on a cloned RNG and disagreements are counted.
GameReport run_money_game(const MoneyConfig &cfg);

}  // namespace qcp

#endif
