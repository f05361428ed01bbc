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

#ifndef QCP_GAMES_H
#define QCP_GAMES_H

#include <functional>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "qcp/cp.h"
#include "qcp/measure.h"

namespace qcp {

struct GameConfig {
    unsigned lambda = 4;
    uint64_t domain = 4;
    unsigned data_bits = 2;
    double gamma = 0.5;
    uint64_t trials = 1000;
    uint64_t seed = 1;
    std::string adversary;
    /// "cp" (the copy-protection scheme) or "toy" (a classical table program).
    std::string scheme = "cp";
    double eps = 0.1;
    double delta = 0.05;
    /// "auto", "exact" or "sampled". Auto is exact up to 12 qubits of pirate state.
    std::string measurement = "auto";
    /// Win-rate level above which a branch counts as non-negligible.
    double nonnegligible = 0.01;
    /// Adversary query budget; 0 means the adversary's default.
    uint64_t queries = 0;
    /// Worker count; 0 reads QCP_THREADS. Never part of a report.
    unsigned threads = 0;
    /// Keep one JSON row per trial in the report.
    bool per_trial = true;

    void validate() const;
    nlohmann::json to_json() const;
};

struct TrialResult {
    bool win = false;
    /// Exact win probability of this trial when it is computable.
    std::optional<double> exact;
    nlohmann::json detail;
};

struct GameReport {
    std::string game;
    std::string adversary;
    uint64_t wins = 0;
    uint64_t trials = 0;
    std::optional<double> derived_expectation;
    double exact_sum = 0;
    uint64_t exact_count = 0;
    nlohmann::json diagnostics = nlohmann::json::object();
    std::vector<nlohmann::json> per_trial;

    double win_rate() const;
    std::pair<double, double> ci95() const;
    /// Mean of the per-trial exact probabilities, if every trial had one.
    std::optional<double> exact_mean() const;
    void add(const TrialResult &t, bool keep_detail);
    /// Appends `other`; merging in trial order gives the same report for any split.
    void merge(const GameReport &other);
    nlohmann::json to_json() const;
};

/// Runs cfg.trials independent trials with per-trial RNG streams
/// derive_seed(cfg.seed, i) and merges them in trial order.
GameReport run_trials(const std::string &game, const GameConfig &cfg,
                      const std::function<TrialResult(uint64_t trial, Rng &rng)> &trial);

// ---------------------------------------------------------------------------
// Direct-product game

/// What a direct-product adversary is handed: one copy of |A> and classical
/// or quantum access to U_A and U_{A-perp}.
class DpChallenge {
   public:
    explicit DpChallenge(const CpSecretKey &sk);

    unsigned lambda() const { return sk_.a.n(); }
    /// The single copy of |A> in register "A". A second call is a protocol violation.
    QuantumState take_state();
    const OraclePtr &u_a() const { return u_a_; }
    const OraclePtr &u_a_dual() const { return u_a_dual_; }
    /// Classical membership queries (counted).
    bool query_a(uint64_t v);
    bool query_a_dual(uint64_t v);
    uint64_t queries() const { return queries_; }
    /// Adversaries never see the key; always throws ProtocolViolation.
    const F2Subspace &secret_key() const;

   private:
    CpSecretKey sk_;
    OraclePtr u_a_;
    OraclePtr u_a_dual_;
    bool taken_ = false;
    uint64_t queries_ = 0;
};

struct DpAnswer {
    uint64_t u = 0;
    uint64_t v = 0;
};

struct DpAdversary {
    std::string name;
    std::function<DpAnswer(DpChallenge &, const GameConfig &, Rng &)> play;
    /// Closed-form win rate, when known.
    std::function<std::optional<double>(const GameConfig &)> expectation;
};

/// give-up, measure-guess, both-token, oracle-search.
const std::vector<DpAdversary> &dp_adversaries();
const DpAdversary &dp_adversary(const std::string &name);

bool dp_wins(const CpSecretKey &sk, const DpAnswer &answer);
GameReport run_direct_product_game(const GameConfig &cfg, const DpAdversary &adversary);

// ---------------------------------------------------------------------------
// Learning game

/// Budgeted classical access to f.
class LearningOracle {
   public:
    LearningOracle(ClassicalFunction f, uint64_t budget);
    uint64_t query(uint64_t x);
    uint64_t domain() const { return f_.domain(); }
    unsigned out_bits() const { return f_.out_bits(); }
    uint64_t queries() const { return queries_; }
    uint64_t budget() const { return budget_; }

   private:
    ClassicalFunction f_;
    uint64_t budget_;
    uint64_t queries_ = 0;
};

struct LearningAdversary {
    std::string name;
    std::function<QuantumProgram(LearningOracle &, const GameConfig &, Rng &)> play;
    std::function<std::optional<double>(const GameConfig &)> expectation;
};

/// table-copy, partial-copy, zero-query-guess, dummy.
const std::vector<LearningAdversary> &learning_adversaries();
const LearningAdversary &learning_adversary(const std::string &name);

/// Pr[Binomial(n, p) >= k].
double binomial_tail(uint64_t n, double p, uint64_t k);

GameReport run_learning_game(const GameConfig &cfg, const LearningAdversary &adversary);

// ---------------------------------------------------------------------------
// Anti-piracy game

/// One sampled instance: f, the input distribution and the program handed out.
struct ApInstance {
    std::string scheme;
    ClassicalFunction f;
    std::vector<double> d;
    std::optional<CpSecretKey> sk;
    std::optional<CpProgram> cp;
    /// The g drawn for the copy-protection program (harness-side only).
    std::optional<ClassicalFunction> g;
    /// The program as a generic (state, spec) pair, registers unprefixed.
    QuantumProgram program;
};

ApInstance ap_instance(const GameConfig &cfg, Rng &rng);

/// The pirate's view of an instance: the program state, its evaluator under
/// any register prefix, and (for the copy-protection scheme) the program's
/// oracle handles.
struct ApChallenge {
    QuantumState state;
    std::function<ProgramSpec(const std::string &prefix)> spec;
    std::optional<CpOracles> oracles;
    uint64_t domain;
    unsigned data_bits;
    unsigned program_qubits() const { return state.layout().total_qubits(); }
};

ApChallenge ap_challenge(const ApInstance &inst);

struct Pirate {
    std::string name;
    std::vector<std::string> schemes;
    std::function<PirateOutput(const ApChallenge &, const GameConfig &, Rng &)> play;
    std::function<std::optional<double>(const GameConfig &)> expectation;
};

/// honest-forward, swap-split-toy, correlated-toy, swap-split-cp, measure-duplicate.
const std::vector<Pirate> &pirates();
const Pirate &pirate(const std::string &name);

/// Program that answers the invalid symbol everywhere, on a one-qubit register.
ProgramSpec dummy_program_spec(uint64_t domain, unsigned data_bits, const std::string &prefix);

/// Threshold projectors of both registers at cfg.gamma.
struct PirateTests {
    BinaryPovm povm1;
    BinaryPovm povm2;
    Mat ti1;
    Mat ti2;
};
PirateTests pirate_tests(const PirateOutput &out, const ApInstance &inst, double gamma);

/// Exact or sampled both-good decision for one pirate output.
TrialResult judge_pirate(const PirateOutput &out, const ApInstance &inst, const GameConfig &cfg, Rng &rng);

GameReport run_anti_piracy_game(const GameConfig &cfg, const Pirate &pirate);

// ---------------------------------------------------------------------------
// Security-proof harness

enum class Branch { E1, E2, Extraction, NotGood };
std::string branch_name(Branch b);

struct CaseSplit {
    Branch branch;
    /// Tr[(TI (x) TI) sigma] with the real oracles.
    double good;
    /// Same with R1 run against (O1, O_bot) / R2 against (O_bot, O2).
    double e1;
    double e2;
    /// Single-register traces of R1 against (O1', O_bot) and R2 against (O_bot, O2').
    double swapped1;
    double swapped2;
    /// Expected flagged weight of R1's O2 queries on A-perp inputs (and of R2's
    /// O1 queries on A inputs) over x drawn from D, with query counts.
    double weight1;
    double weight2;
    uint64_t queries1;
    uint64_t queries2;
    /// |Tr[P rho] - Tr[P_sub rho]| for each register.
    double gap1;
    double gap2;
    /// Gaps within 2 sqrt(T W) (always asserted) and within sqrt(T W).
    bool within_hybrid_bound;
    bool within_literal_bound;

    nlohmann::json to_json() const;
};

/// Classifies a pirate output of the copy-protection scheme into the proof's
/// branches using exact traces.
CaseSplit case_split_probe(const PirateOutput &out, const ApInstance &inst, const GameConfig &cfg);

struct ExtractionResult {
    bool success = false;
    bool tested_good = false;
    std::optional<uint64_t> u;
    std::optional<uint64_t> v;
    /// Empty on success; otherwise why the attempt stopped.
    std::string failure;
    nlohmann::json to_json() const;
};

/// Tests both registers, then halts R1 at a uniformly chosen O2 query and
/// R2 at a uniformly chosen O1 query, measuring the queried vectors. The
/// registers of R1 and R2 may coincide, in which case R1's partial run is
/// rewound before R2 starts.
/// `tests` may carry precomputed pirate_tests for repeated runs on one output.
ExtractionResult extract_vectors(const PirateOutput &out, const ApInstance &inst, const GameConfig &cfg, Rng &rng,
                                 const PirateTests *tests = nullptr);

}  // namespace qcp

#endif
