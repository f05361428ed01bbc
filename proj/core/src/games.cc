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

#include "qcp/games.h"

#include <algorithm>
#include <cmath>

namespace qcp {

namespace {

constexpr unsigned kExactPirateQubits = 12;

template <typename T>
const T &find_named(const std::vector<T> &items, const std::string &name, const char *what) {
    for (const auto &it : items) {
        if (it.name == name) {
            return it;
        }
    }
    std::string known;
    for (const auto &it : items) {
        known += (known.empty() ? "" : ", ") + it.name;
    }
    throw std::invalid_argument(std::string("unknown ") + what + " '" + name + "' (known: " + known + ")");
}

uint64_t needed_correct(const GameConfig &cfg) {
    return static_cast<uint64_t>(std::ceil(cfg.gamma * static_cast<double>(cfg.domain) - 1e-9));
}

double subspace_size(unsigned lambda) {
    return std::ldexp(1.0, static_cast<int>(lambda / 2));
}

/// Same amplitudes under a different register naming.
QuantumState relabel(const QuantumState &s, const RegisterLayout &layout) {
    if (layout.total_qubits() != s.layout().total_qubits()) {
        throw DimensionError("relabel: qubit count mismatch");
    }
    return s.is_pure() ? QuantumState::pure(layout, s.vector()) : QuantumState::mixed(layout, s.matrix());
}

bool use_exact(const GameConfig &cfg, unsigned qubits) {
    if (cfg.measurement == "exact") {
        return true;
    }
    if (cfg.measurement == "sampled") {
        return false;
    }
    return qubits <= kExactPirateQubits;
}

/// Flagged weight of the recorded queries to `slot`; zero when there are none.
double slot_weight(const Transcript &t, const std::string &flag, const std::string &slot) {
    double w = 0;
    for (const auto &r : t.records) {
        if (r.slot != slot) {
            continue;
        }
        auto it = r.weights.find(flag);
        if (it != r.weights.end()) {
            w += it->second;
        }
    }
    return w;
}

QuantumState pure_view(const QuantumState &s, const std::string &purifier) {
    return s.is_pure() ? s : purify(s, purifier);
}

}  // namespace

// ---------------------------------------------------------------------------
// Config and reports

void GameConfig::validate() const {
    if (lambda == 0 || lambda % 2 != 0 || lambda > kMaxCpLambda) {
        throw DimensionError("lambda must be even and in [2, " + std::to_string(kMaxCpLambda) + "]");
    }
    if (domain == 0 || domain > (uint64_t{1} << 20)) {
        throw DimensionError("domain must be in [1, 2^20]");
    }
    if (data_bits == 0 || data_bits > 16) {
        throw DimensionError("data_bits must be in [1, 16]");
    }
    if (!(gamma > 0 && gamma <= 1)) {
        throw std::invalid_argument("gamma must be in (0, 1]");
    }
    if (trials == 0) {
        throw std::invalid_argument("trials must be positive");
    }
    if (!(eps > 0 && eps < 1) || !(delta > 0 && delta < 1)) {
        throw std::invalid_argument("eps and delta must be in (0, 1)");
    }
    if (measurement != "auto" && measurement != "exact" && measurement != "sampled") {
        throw std::invalid_argument("measurement must be auto, exact or sampled");
    }
    if (scheme != "cp" && scheme != "toy") {
        throw std::invalid_argument("scheme must be cp or toy");
    }
    if (!(nonnegligible >= 0 && nonnegligible <= 1)) {
        throw std::invalid_argument("nonnegligible must be in [0, 1]");
    }
}

nlohmann::json GameConfig::to_json() const {
    return {{"lambda", lambda},
            {"domain", domain},
            {"data_bits", data_bits},
            {"gamma", gamma},
            {"trials", trials},
            {"seed", seed},
            {"adversary", adversary},
            {"scheme", scheme},
            {"eps", eps},
            {"delta", delta},
            {"measurement", measurement},
            {"nonnegligible", nonnegligible},
            {"queries", queries}};
}

double GameReport::win_rate() const {
    return trials == 0 ? 0.0 : static_cast<double>(wins) / static_cast<double>(trials);
}

std::pair<double, double> GameReport::ci95() const {
    return wilson_ci95(wins, trials);
}

std::optional<double> GameReport::exact_mean() const {
    if (trials == 0 || exact_count != trials) {
        return std::nullopt;
    }
    return exact_sum / static_cast<double>(trials);
}

void GameReport::add(const TrialResult &t, bool keep_detail) {
    trials++;
    wins += t.win ? 1 : 0;
    if (t.exact) {
        exact_sum += *t.exact;
        exact_count++;
    }
    if (keep_detail) {
        nlohmann::json row = t.detail.is_null() ? nlohmann::json::object() : t.detail;
        row["win"] = t.win;
        if (t.exact) {
            row["exact"] = *t.exact;
        }
        per_trial.push_back(std::move(row));
    }
}

void GameReport::merge(const GameReport &other) {
    wins += other.wins;
    trials += other.trials;
    exact_sum += other.exact_sum;
    exact_count += other.exact_count;
    per_trial.insert(per_trial.end(), other.per_trial.begin(), other.per_trial.end());
}

nlohmann::json GameReport::to_json() const {
    auto [lo, hi] = ci95();
    nlohmann::json j;
    j["game"] = game;
    j["adversary"] = adversary;
    j["trials"] = trials;
    j["wins"] = wins;
    j["win_rate"] = win_rate();
    j["ci95"] = {lo, hi};
    j["derived_expectation"] = derived_expectation ? nlohmann::json(*derived_expectation) : nlohmann::json(nullptr);
    auto em = exact_mean();
    j["exact_mean"] = em ? nlohmann::json(*em) : nlohmann::json(nullptr);
    j["diagnostics"] = diagnostics;
    if (!per_trial.empty()) {
        j["per_trial"] = per_trial;
    }
    return j;
}

GameReport run_trials(const std::string &game, const GameConfig &cfg,
                      const std::function<TrialResult(uint64_t trial, Rng &rng)> &trial) {
    std::vector<TrialResult> results(cfg.trials);
    unsigned threads = cfg.threads != 0 ? cfg.threads : worker_count();
    parallel_for(cfg.trials, threads, [&](size_t i) {
        Rng rng(derive_seed(cfg.seed, i));
        results[i] = trial(i, rng);
        results[i].detail["trial"] = i;
    });
    GameReport report;
    report.game = game;
    report.adversary = cfg.adversary;
    for (const auto &r : results) {
        report.add(r, cfg.per_trial);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Direct-product game

DpChallenge::DpChallenge(const CpSecretKey &sk)
    : sk_(sk),
      u_a_(std::make_shared<const InstrumentedOracle>(membership_oracle(sk.a, "U_A", "A"))),
      u_a_dual_(std::make_shared<const InstrumentedOracle>(membership_oracle(sk.a_dual, "U_Aperp", "Aperp"))) {}

QuantumState DpChallenge::take_state() {
    if (taken_) {
        throw ProtocolViolation("direct-product game: the subspace state was already handed out");
    }
    taken_ = true;
    return prepare_subspace_state(sk_.a, "A");
}

bool DpChallenge::query_a(uint64_t v) {
    queries_++;
    return u_a_->encoded(v) != 0;
}

bool DpChallenge::query_a_dual(uint64_t v) {
    queries_++;
    return u_a_dual_->encoded(v) != 0;
}

const F2Subspace &DpChallenge::secret_key() const {
    throw ProtocolViolation("direct-product game: the adversary has no access to the secret key");
}

bool dp_wins(const CpSecretKey &sk, const DpAnswer &answer) {
    return answer.u != 0 && answer.v != 0 && sk.a.contains(answer.u) && sk.a_dual.contains(answer.v);
}

namespace {

// Pr[u in A \ {0}] * Pr[v in A-perp \ {0}] for a measured u and a uniform v.
double dp_guess_rate(unsigned lambda) {
    double k = subspace_size(lambda);
    return (1 - 1 / k) * (k - 1) / std::ldexp(1.0, static_cast<int>(lambda));
}

uint64_t oracle_search_budget(const GameConfig &cfg) {
    return cfg.queries != 0 ? cfg.queries : 4;
}

std::vector<DpAdversary> make_dp_adversaries() {
    std::vector<DpAdversary> out;
    out.push_back({"give-up", [](DpChallenge &, const GameConfig &, Rng &) { return DpAnswer{0, 0}; },
                   [](const GameConfig &) -> std::optional<double> { return 0.0; }});
    out.push_back({"measure-guess",
                   [](DpChallenge &ch, const GameConfig &, Rng &rng) {
                       QuantumState s = ch.take_state();
                       uint64_t u = measure_register(s, "A", rng).outcome;
                       uint64_t v = uniform_below(rng, uint64_t{1} << ch.lambda());
                       return DpAnswer{u, v};
                   },
                   [](const GameConfig &cfg) -> std::optional<double> { return dp_guess_rate(cfg.lambda); }});
    out.push_back({"both-token",
                   [](DpChallenge &ch, const GameConfig &, Rng &rng) {
                       QuantumState s = ch.take_state();
                       MeasureResult mu = measure_register(s, "A", rng);
                       QuantumState h = hadamard_all(mu.post, "A");
                       uint64_t v = measure_register(h, "A", rng).outcome;
                       return DpAnswer{mu.outcome, v};
                   },
                   [](const GameConfig &cfg) -> std::optional<double> { return dp_guess_rate(cfg.lambda); }});
    out.push_back({"oracle-search",
                   [](DpChallenge &ch, const GameConfig &cfg, Rng &rng) {
                       QuantumState s = ch.take_state();
                       uint64_t u = measure_register(s, "A", rng).outcome;
                       uint64_t v = 0;
                       for (uint64_t q = 0; q < oracle_search_budget(cfg); q++) {
                           v = uniform_below(rng, uint64_t{1} << ch.lambda());
                           if (ch.query_a_dual(v)) {
                               break;
                           }
                       }
                       return DpAnswer{u, v};
                   },
                   [](const GameConfig &cfg) -> std::optional<double> {
                       double k = subspace_size(cfg.lambda);
                       double p = (k - 1) / std::ldexp(1.0, static_cast<int>(cfg.lambda));
                       double q = static_cast<double>(oracle_search_budget(cfg));
                       return (1 - 1 / k) * (1 - std::pow(1 - p, q));
                   }});
    return out;
}

}  // namespace

const std::vector<DpAdversary> &dp_adversaries() {
    static const std::vector<DpAdversary> all = make_dp_adversaries();
    return all;
}

const DpAdversary &dp_adversary(const std::string &name) {
    return find_named(dp_adversaries(), name, "direct-product adversary");
}

GameReport run_direct_product_game(const GameConfig &cfg, const DpAdversary &adversary) {
    cfg.validate();
    GameConfig c = cfg;
    c.adversary = adversary.name;
    GameReport report = run_trials("direct-product", c, [&](uint64_t, Rng &rng) {
        CpSecretKey sk = cp_setup(c.lambda, rng);
        DpChallenge ch(sk);
        DpAnswer ans = adversary.play(ch, c, rng);
        TrialResult t;
        t.win = dp_wins(sk, ans);
        t.detail = {{"u", ans.u}, {"v", ans.v}, {"queries", ch.queries()}};
        return t;
    });
    report.derived_expectation = adversary.expectation(c);
    return report;
}

// ---------------------------------------------------------------------------
// Learning game

LearningOracle::LearningOracle(ClassicalFunction f, uint64_t budget) : f_(std::move(f)), budget_(budget) {}

uint64_t LearningOracle::query(uint64_t x) {
    if (queries_ >= budget_) {
        throw ProtocolViolation("learning game: query budget exhausted");
    }
    queries_++;
    return f_(x);
}

double binomial_tail(uint64_t n, double p, uint64_t k) {
    if (k == 0) {
        return 1.0;
    }
    if (k > n) {
        return 0.0;
    }
    if (p <= 0) {
        return 0.0;
    }
    if (p >= 1) {
        return 1.0;
    }
    // pmf(j) by the ratio recurrence from pmf(0) = (1 - p)^n.
    double pmf = std::pow(1 - p, static_cast<double>(n));
    double tail = 0;
    for (uint64_t j = 0; j <= n; j++) {
        if (j >= k) {
            tail += pmf;
        }
        pmf *= static_cast<double>(n - j) / static_cast<double>(j + 1) * p / (1 - p);
    }
    return std::min(1.0, tail);
}

namespace {

/// Queries the first k inputs and guesses the rest uniformly.
QuantumProgram partial_table_program(LearningOracle &o, uint64_t k, Rng &rng) {
    std::vector<Decoded> table(o.domain());
    for (uint64_t x = 0; x < o.domain(); x++) {
        table[x] = x < k ? o.query(x) : uniform_below(rng, uint64_t{1} << o.out_bits());
    }
    ProgramSpec spec = table_program_spec({table}, o.domain(), o.out_bits());
    return {QuantumState::zeros(spec.program), spec};
}

std::optional<double> partial_rate(const GameConfig &cfg, uint64_t k) {
    uint64_t need = needed_correct(cfg);
    if (k >= need) {
        return 1.0;
    }
    return binomial_tail(cfg.domain - k, std::ldexp(1.0, -static_cast<int>(cfg.data_bits)), need - k);
}

uint64_t learning_budget(const GameConfig &cfg) {
    return cfg.queries != 0 ? cfg.queries : cfg.domain;
}

uint64_t table_copy_queries(const GameConfig &cfg) {
    return std::min(cfg.domain, learning_budget(cfg));
}

uint64_t partial_copy_queries(const GameConfig &cfg) {
    return std::min(cfg.domain / 2, learning_budget(cfg));
}

std::vector<LearningAdversary> make_learning_adversaries() {
    std::vector<LearningAdversary> out;
    out.push_back({"table-copy",
                   [](LearningOracle &o, const GameConfig &cfg, Rng &rng) {
                       return partial_table_program(o, table_copy_queries(cfg), rng);
                   },
                   [](const GameConfig &cfg) { return partial_rate(cfg, table_copy_queries(cfg)); }});
    out.push_back({"partial-copy",
                   [](LearningOracle &o, const GameConfig &cfg, Rng &rng) {
                       return partial_table_program(o, partial_copy_queries(cfg), rng);
                   },
                   [](const GameConfig &cfg) { return partial_rate(cfg, partial_copy_queries(cfg)); }});
    out.push_back({"zero-query-guess",
                   [](LearningOracle &o, const GameConfig &, Rng &rng) { return partial_table_program(o, 0, rng); },
                   [](const GameConfig &cfg) { return partial_rate(cfg, 0); }});
    out.push_back({"dummy",
                   [](LearningOracle &o, const GameConfig &, Rng &) {
                       ProgramSpec spec = dummy_program_spec(o.domain(), o.out_bits(), "");
                       return QuantumProgram{QuantumState::zeros(spec.program), spec};
                   },
                   [](const GameConfig &) -> std::optional<double> { return 0.0; }});
    return out;
}

/// One threshold test of a single program; exact trace when small enough.
TrialResult judge_single(const QuantumProgram &prog, const ClassicalFunction &f, const std::vector<double> &d,
                         const GameConfig &cfg, Rng &rng) {
    BinaryPovm povm = goodness_povm(prog.spec, f, d);
    ProjectiveImplementation pi = proj_impl(povm);
    std::vector<std::string> regs = prog.spec.program.names();
    TrialResult t;
    if (use_exact(cfg, prog.state.layout().total_qubits())) {
        double p = local_expectation(prog.state, regs, threshold_impl(pi, cfg.gamma));
        t.exact = p;
        t.win = uniform01(rng) < p;
        t.detail["measurement"] = "exact";
    } else {
        ApiResult r = sampled_api(prog.state, regs, pi, cfg.eps, cfg.delta, rng);
        t.win = r.estimate >= cfg.gamma;
        t.detail["measurement"] = "sampled";
        t.detail["estimate"] = r.estimate;
    }
    return t;
}

}  // namespace

const std::vector<LearningAdversary> &learning_adversaries() {
    static const std::vector<LearningAdversary> all = make_learning_adversaries();
    return all;
}

const LearningAdversary &learning_adversary(const std::string &name) {
    return find_named(learning_adversaries(), name, "learning adversary");
}

GameReport run_learning_game(const GameConfig &cfg, const LearningAdversary &adversary) {
    cfg.validate();
    GameConfig c = cfg;
    c.adversary = adversary.name;
    std::vector<double> d = uniform_distribution(c.domain);
    GameReport report = run_trials("learning", c, [&](uint64_t, Rng &rng) {
        ClassicalFunction f = ClassicalFunction::random(c.domain, c.data_bits, rng);
        LearningOracle oracle(f, learning_budget(c));
        QuantumProgram prog = adversary.play(oracle, c, rng);
        TrialResult t = judge_single(prog, f, d, c, rng);
        t.detail["queries"] = oracle.queries();
        return t;
    });
    report.derived_expectation = adversary.expectation(c);
    return report;
}

// ---------------------------------------------------------------------------
// Anti-piracy game

ProgramSpec dummy_program_spec(uint64_t domain, unsigned data_bits, const std::string &prefix) {
    return table_program_spec({std::vector<Decoded>(domain, std::nullopt)}, domain, data_bits, prefix);
}

namespace {

// Toy scheme: program basis state |1> answers f, |0> answers the invalid symbol.
std::vector<std::vector<Decoded>> toy_tables(const ClassicalFunction &f) {
    return {std::vector<Decoded>(f.domain(), std::nullopt), answer_table(f)};
}

}  // namespace

ApInstance ap_instance(const GameConfig &cfg, Rng &rng) {
    ClassicalFunction f = ClassicalFunction::random(cfg.domain, cfg.data_bits, rng);
    std::vector<double> d = uniform_distribution(cfg.domain);
    if (cfg.scheme == "cp") {
        CpSecretKey sk = cp_setup(cfg.lambda, rng);
        ClassicalFunction g = ClassicalFunction::random(cfg.domain, cfg.data_bits, rng);
        CpProgram cp = cp_generate_with_g(sk, f, g);
        QuantumProgram prog{cp.state(), cp.spec("")};
        return ApInstance{cfg.scheme, f, d, sk, cp, g, prog};
    }
    if (cfg.scheme == "toy") {
        ProgramSpec spec = table_program_spec(toy_tables(f), cfg.domain, cfg.data_bits);
        QuantumProgram prog{QuantumState::basis(spec.program, 1), spec};
        return ApInstance{cfg.scheme, f, d, std::nullopt, std::nullopt, std::nullopt, prog};
    }
    throw std::invalid_argument("ap_instance: unknown scheme " + cfg.scheme);
}

ApChallenge ap_challenge(const ApInstance &inst) {
    ApChallenge ch{inst.program.state, {}, std::nullopt, inst.f.domain(), inst.f.out_bits()};
    if (inst.cp) {
        CpProgram cp = *inst.cp;
        ch.oracles = cp.oracles();
        ch.spec = [cp](const std::string &prefix) { return cp.spec(prefix); };
    } else {
        auto tables = toy_tables(inst.f);
        uint64_t domain = inst.f.domain();
        unsigned m = inst.f.out_bits();
        ch.spec = [tables, domain, m](const std::string &prefix) {
            return table_program_spec(tables, domain, m, prefix);
        };
    }
    return ch;
}

namespace {

/// Two one-qubit toy registers in a 2-qubit state given by amplitudes over
/// |r1 r2> with |1> the working program and |0> the dummy.
PirateOutput toy_pair(const ApChallenge &ch, const std::vector<double> &amps) {
    PirateOutput out{QuantumState::zeros(RegisterLayout()), ch.spec("r1_"), ch.spec("r2_")};
    if (ch.program_qubits() != 1) {
        throw DimensionError("toy pirate: expected a one-qubit program");
    }
    // The pirate only ever sees the handed-out |1>; it prepares fresh copies
    // of basis states, which is free for classical table programs.
    Vec v(4);
    for (int i = 0; i < 4; i++) {
        v[i] = amps[static_cast<size_t>(i)];
    }
    out.state = QuantumState::pure(out.r1.program + out.r2.program, v / v.norm());
    return out;
}

double measure_duplicate_rate(const GameConfig &cfg) {
    double k = subspace_size(cfg.lambda);
    double top = (k - 1) * (k - 1) / (k * k);
    if (cfg.gamma > top + 1e-9) {
        return 0.0;
    }
    return (1 - 1 / k) / ((k - 1) * (k - 1));
}

std::vector<Pirate> make_pirates() {
    std::vector<Pirate> out;
    out.push_back({"honest-forward",
                   {"cp", "toy"},
                   [](const ApChallenge &ch, const GameConfig &, Rng &) {
                       ProgramSpec r1 = ch.spec("r1_");
                       ProgramSpec r2 = dummy_program_spec(ch.domain, ch.data_bits, "r2_");
                       QuantumState s = tensor(relabel(ch.state, r1.program), QuantumState::zeros(r2.program));
                       return PirateOutput{s, r1, r2};
                   },
                   [](const GameConfig &) -> std::optional<double> { return 0.0; }});
    out.push_back({"swap-split-toy",
                   {"toy"},
                   [](const ApChallenge &ch, const GameConfig &, Rng &) {
                       // (|P>|D> + |D>|P>) / sqrt(2), indices |r1 r2>.
                       return toy_pair(ch, {0, 1, 1, 0});
                   },
                   [](const GameConfig &) -> std::optional<double> { return 0.0; }});
    out.push_back({"correlated-toy",
                   {"toy"},
                   [](const ApChallenge &ch, const GameConfig &, Rng &) {
                       // sqrt(1/3)|P P> + sqrt(2/3)|D D>.
                       return toy_pair(ch, {std::sqrt(2.0 / 3.0), 0, 0, std::sqrt(1.0 / 3.0)});
                   },
                   [](const GameConfig &) -> std::optional<double> { return 1.0 / 3.0; }});
    out.push_back({"swap-split-cp",
                   {"cp"},
                   [](const ApChallenge &ch, const GameConfig &, Rng &) {
                       // A mode qubit on R1's side decides which register gets
                       // the program; the other one holds |0...0>.
                       ProgramSpec r1 = ch.spec("r1_");
                       ProgramSpec r2 = ch.spec("r2_");
                       r1.program = RegisterLayout({{"r1_mode", 1}}) + r1.program;
                       RegisterLayout layout = r1.program + r2.program;
                       Vec a = ch.state.vector();
                       auto n = static_cast<Eigen::Index>(a.size());
                       Vec zero = Vec::Zero(n);
                       zero[0] = 1.0;
                       Vec v = Vec::Zero(static_cast<Eigen::Index>(layout.dim()));
                       // mode 0: |A> in R1, |0> in R2. mode 1: |0> in R1, |A> in R2.
                       for (Eigen::Index i = 0; i < n; i++) {
                           v[i * n] += a[i] / std::sqrt(2.0);
                           v[n * n + i] += a[i] / std::sqrt(2.0);
                       }
                       return PirateOutput{QuantumState::pure(layout, v), r1, r2};
                   },
                   [](const GameConfig &) -> std::optional<double> { return 0.0; }});
    out.push_back({"measure-duplicate",
                   {"cp"},
                   [](const ApChallenge &ch, const GameConfig &, Rng &rng) {
                       ProgramSpec r1 = ch.spec("r1_");
                       ProgramSpec r2 = ch.spec("r2_");
                       const std::string &reg = ch.state.layout().registers().front().name;
                       uint64_t u = measure_register(ch.state, reg, rng).outcome;
                       QuantumState s = tensor(QuantumState::basis(r1.program, u), QuantumState::basis(r2.program, u));
                       return PirateOutput{s, r1, r2};
                   },
                   [](const GameConfig &cfg) -> std::optional<double> { return measure_duplicate_rate(cfg); }});
    return out;
}

}  // namespace

const std::vector<Pirate> &pirates() {
    static const std::vector<Pirate> all = make_pirates();
    return all;
}

const Pirate &pirate(const std::string &name) {
    return find_named(pirates(), name, "pirate");
}

PirateTests pirate_tests(const PirateOutput &out, const ApInstance &inst, double gamma) {
    BinaryPovm p1 = goodness_povm(out.r1, inst.f, inst.d);
    BinaryPovm p2 = goodness_povm(out.r2, inst.f, inst.d);
    Mat t1 = threshold_impl(proj_impl(p1), gamma);
    Mat t2 = threshold_impl(proj_impl(p2), gamma);
    return {std::move(p1), std::move(p2), std::move(t1), std::move(t2)};
}

TrialResult judge_pirate(const PirateOutput &out, const ApInstance &inst, const GameConfig &cfg, Rng &rng) {
    std::vector<std::string> regs1 = out.r1.program.names();
    std::vector<std::string> regs2 = out.r2.program.names();
    TrialResult t;
    if (use_exact(cfg, out.state.layout().total_qubits())) {
        PirateTests tests = pirate_tests(out, inst, cfg.gamma);
        JointThresholdResult r = joint_threshold_measure(out.state, regs1, tests.ti1, regs2, tests.ti2, rng);
        t.win = r.b1 == 0 && r.b2 == 0;
        t.exact = r.both_good_prob;
        t.detail = {{"measurement", "exact"}, {"b1", r.b1}, {"b2", r.b2}};
    } else {
        ProjectiveImplementation pi1 = proj_impl(goodness_povm(out.r1, inst.f, inst.d));
        ProjectiveImplementation pi2 = proj_impl(goodness_povm(out.r2, inst.f, inst.d));
        ApiResult a = sampled_api(out.state, regs1, pi1, cfg.eps, cfg.delta, rng);
        ApiResult b = sampled_api(a.post, regs2, pi2, cfg.eps, cfg.delta, rng);
        t.win = a.estimate >= cfg.gamma && b.estimate >= cfg.gamma;
        t.detail = {{"measurement", "sampled"}, {"estimate1", a.estimate}, {"estimate2", b.estimate}};
    }
    return t;
}

GameReport run_anti_piracy_game(const GameConfig &cfg, const Pirate &p) {
    cfg.validate();
    if (std::find(p.schemes.begin(), p.schemes.end(), cfg.scheme) == p.schemes.end()) {
        throw std::invalid_argument("pirate '" + p.name + "' does not apply to scheme " + cfg.scheme);
    }
    GameConfig c = cfg;
    c.adversary = p.name;
    GameReport report = run_trials("anti-piracy", c, [&](uint64_t, Rng &rng) {
        ApInstance inst = ap_instance(c, rng);
        PirateOutput out = p.play(ap_challenge(inst), c, rng);
        return judge_pirate(out, inst, c, rng);
    });
    report.derived_expectation = p.expectation(c);
    report.diagnostics["scheme"] = c.scheme;
    return report;
}

// ---------------------------------------------------------------------------
// Security-proof harness

std::string branch_name(Branch b) {
    switch (b) {
        case Branch::E1:
            return "E1";
        case Branch::E2:
            return "E2";
        case Branch::Extraction:
            return "extraction";
        case Branch::NotGood:
            return "not-good";
    }
    return "?";
}

nlohmann::json CaseSplit::to_json() const {
    return {{"branch", branch_name(branch)},
            {"good", good},
            {"e1", e1},
            {"e2", e2},
            {"swapped1", swapped1},
            {"swapped2", swapped2},
            {"weight1", weight1},
            {"weight2", weight2},
            {"queries1", queries1},
            {"queries2", queries2},
            {"gap1", gap1},
            {"gap2", gap2},
            {"within_hybrid_bound", within_hybrid_bound},
            {"within_literal_bound", within_literal_bound}};
}

namespace {

struct WeightProbe {
    double weight = 0;
    uint64_t queries = 0;
};

/// E_{x ~ D} of the flagged weight of `spec`'s queries to `slot`, run on the
/// whole pirate state, plus the largest per-input query count.
WeightProbe probe_weight(const QuantumState &pure, const ProgramSpec &spec, const std::vector<double> &d,
                         const std::string &slot, const std::string &flag) {
    RegisterLayout layout = pure.layout() + spec.ancillas;
    Vec start = tensor(pure, QuantumState::zeros(spec.ancillas)).vector();
    WeightProbe out;
    for (size_t x = 0; x < d.size(); x++) {
        Circuit c = spec.evaluator(x);
        out.queries = std::max<uint64_t>(out.queries, count_queries(c, slot));
        if (d[x] <= 0) {
            continue;
        }
        Vec psi = start;
        Transcript t;
        run_circuit(c, psi, layout, spec.oracles, &t);
        out.weight += d[x] * slot_weight(t, flag, slot);
    }
    return out;
}

Mat threshold_of(const ProgramSpec &spec, const ApInstance &inst, double gamma) {
    return threshold_impl(proj_impl(goodness_povm(spec, inst.f, inst.d)), gamma);
}

}  // namespace

CaseSplit case_split_probe(const PirateOutput &out, const ApInstance &inst, const GameConfig &cfg) {
    if (!inst.cp || !inst.sk || !inst.g) {
        throw std::invalid_argument("case_split_probe: needs a copy-protection instance");
    }
    const QuantumState &sigma = out.state;
    std::vector<std::string> regs1 = out.r1.program.names();
    std::vector<std::string> regs2 = out.r2.program.names();
    double gamma = cfg.gamma;
    const CpOracles &o = inst.cp->oracles();
    auto bot1 = std::make_shared<const InstrumentedOracle>(bot_oracle(*o.o1));
    auto bot2 = std::make_shared<const InstrumentedOracle>(bot_oracle(*o.o2));
    CpOracles sw = swapped_cp_oracles(inst.sk->a, inst.f, *inst.g);

    PirateTests real = pirate_tests(out, inst, gamma);
    ProgramSpec r1_sub = out.r1.rebound({{"O2", bot2}});
    ProgramSpec r2_sub = out.r2.rebound({{"O1", bot1}});
    BinaryPovm p1_sub = goodness_povm(r1_sub, inst.f, inst.d);
    BinaryPovm p2_sub = goodness_povm(r2_sub, inst.f, inst.d);
    Mat ti1_sub = threshold_impl(proj_impl(p1_sub), gamma);
    Mat ti2_sub = threshold_impl(proj_impl(p2_sub), gamma);

    CaseSplit cs{};
    cs.good = joint_good_probability(sigma, regs1, real.ti1, regs2, real.ti2);
    cs.e1 = joint_good_probability(sigma, regs1, ti1_sub, regs2, real.ti2);
    cs.e2 = joint_good_probability(sigma, regs1, real.ti1, regs2, ti2_sub);
    cs.swapped1 = local_expectation(sigma, regs1, threshold_of(out.r1.rebound({{"O1", sw.o1}, {"O2", bot2}}), inst, gamma));
    cs.swapped2 = local_expectation(sigma, regs2, threshold_of(out.r2.rebound({{"O1", bot1}, {"O2", sw.o2}}), inst, gamma));

    QuantumState pure = pure_view(sigma, "probe_purifier");
    WeightProbe w1 = probe_weight(pure, out.r1, inst.d, "O2", "Aperp");
    WeightProbe w2 = probe_weight(pure, out.r2, inst.d, "O1", "A");
    cs.weight1 = w1.weight;
    cs.weight2 = w2.weight;
    cs.queries1 = w1.queries;
    cs.queries2 = w2.queries;
    cs.gap1 = std::abs(local_expectation(sigma, regs1, real.povm1.p()) - local_expectation(sigma, regs1, p1_sub.p()));
    cs.gap2 = std::abs(local_expectation(sigma, regs2, real.povm2.p()) - local_expectation(sigma, regs2, p2_sub.p()));
    double lit1 = std::sqrt(static_cast<double>(cs.queries1) * cs.weight1);
    double lit2 = std::sqrt(static_cast<double>(cs.queries2) * cs.weight2);
    cs.within_hybrid_bound = cs.gap1 <= 2 * lit1 + 1e-9 && cs.gap2 <= 2 * lit2 + 1e-9;
    cs.within_literal_bound = cs.gap1 <= lit1 + 1e-9 && cs.gap2 <= lit2 + 1e-9;
    if (!cs.within_hybrid_bound) {
        throw InvariantViolation("case_split_probe: substitution gap exceeds 2 sqrt(T W)");
    }

    double thr = cfg.nonnegligible;
    if (cs.good < thr) {
        cs.branch = Branch::NotGood;
    } else if (cs.e1 >= thr) {
        cs.branch = Branch::E1;
    } else if (cs.e2 >= thr) {
        cs.branch = Branch::E2;
    } else {
        cs.branch = Branch::Extraction;
    }
    return cs;
}

nlohmann::json ExtractionResult::to_json() const {
    return {{"success", success},
            {"tested_good", tested_good},
            {"u", u ? nlohmann::json(*u) : nlohmann::json(nullptr)},
            {"v", v ? nlohmann::json(*v) : nlohmann::json(nullptr)},
            {"failure", failure}};
}

namespace {

struct HaltedMeasurement {
    std::optional<uint64_t> vector;
    QuantumState state;
};

/// Runs `spec` on a random x up to a random query to `slot`, measures the
/// query's vector wires (the low `lambda` input bits), rewinds the partial
/// run and discards the ancillas.
HaltedMeasurement halt_and_measure(const QuantumState &state, const ProgramSpec &spec,
                                   const std::vector<double> &d, const std::string &slot, unsigned lambda,
                                   Rng &rng) {
    uint64_t x = sample_index(rng, d);
    Circuit c = spec.evaluator(x);
    size_t total = count_queries(c, slot);
    if (total == 0) {
        return {std::nullopt, state};
    }
    uint64_t j = uniform_below(rng, total);
    RegisterLayout layout = state.layout() + spec.ancillas;
    Vec psi = tensor(state, QuantumState::zeros(spec.ancillas)).vector();
    RunOptions opts;
    opts.halt_before = std::make_pair(slot, j);
    RunResult rr = run_circuit(c, psi, layout, spec.oracles, nullptr, opts);
    const auto &q = std::get<QueryOp>(c.at(rr.ops_applied));

    QuantumState s = QuantumState::pure(layout, psi);
    uint64_t packed = 0;
    unsigned width = 0;
    for (const auto &reg : q.inputs) {
        MeasureResult m = measure_register(s, reg, rng);
        s = m.post;
        unsigned w = layout.width(reg);
        packed = (packed << w) | m.outcome;
        width += w;
    }
    uint64_t input = width >= 64 ? packed : ((q.prefix << width) | packed);

    psi = s.vector();
    run_circuit(invert_circuit(c, layout, rr.ops_applied), psi, layout, spec.oracles);
    s = QuantumState::pure(layout, psi);
    for (const auto &anc : spec.ancillas.registers()) {
        s = drop_register(measure_register(s, anc.name, rng).post, anc.name);
    }
    return {input & f2_mask(lambda), s};
}

}  // namespace

ExtractionResult extract_vectors(const PirateOutput &out, const ApInstance &inst, const GameConfig &cfg, Rng &rng,
                                 const PirateTests *tests) {
    if (!inst.sk) {
        throw std::invalid_argument("extract_vectors: needs a copy-protection instance");
    }
    std::optional<PirateTests> own;
    if (tests == nullptr) {
        own = pirate_tests(out, inst, cfg.gamma);
        tests = &*own;
    }
    ExtractionResult res;
    QuantumState s = pure_view(out.state, "extract_purifier");
    GentleResult g1 = gentle_measure(s, tests->ti1, rng, out.r1.program.names());
    if (g1.outcome != 0) {
        res.failure = "R1 failed its threshold test";
        return res;
    }
    GentleResult g2 = gentle_measure(g1.post, tests->ti2, rng, out.r2.program.names());
    if (g2.outcome != 0) {
        res.failure = "R2 failed its threshold test";
        return res;
    }
    res.tested_good = true;
    unsigned lambda = inst.sk->a.n();

    HaltedMeasurement h1 = halt_and_measure(g2.post, out.r1, inst.d, "O2", lambda, rng);
    if (!h1.vector) {
        res.failure = "R1 makes no O2 queries";
        return res;
    }
    res.v = h1.vector;
    HaltedMeasurement h2 = halt_and_measure(h1.state, out.r2, inst.d, "O1", lambda, rng);
    if (!h2.vector) {
        res.failure = "R2 makes no O1 queries";
        return res;
    }
    res.u = h2.vector;
    bool u_ok = *res.u != 0 && inst.sk->a.contains(*res.u);
    bool v_ok = *res.v != 0 && inst.sk->a_dual.contains(*res.v);
    res.success = u_ok && v_ok;
    if (!res.success) {
        res.failure = !u_ok ? "u outside A \\ {0}" : "v outside A-perp \\ {0}";
    }
    return res;
}

}  // namespace qcp
