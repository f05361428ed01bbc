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

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qcp {

namespace {

bool is_power_of_two(uint64_t v) {
    return v != 0 && (v & (v - 1)) == 0;
}

unsigned log2_exact(uint64_t v) {
    unsigned b = 0;
    while ((uint64_t{1} << b) < v) {
        b++;
    }
    return b;
}

}  // namespace

uint64_t PkePublicKey::encrypt(uint64_t m, uint64_t r) const {
    if (m >= msg_space || r >= rand_space) {
        throw std::out_of_range("PkePublicKey::encrypt: message or coins out of range");
    }
    return enc[m * rand_space + r];
}

nlohmann::json PkePublicKey::to_json() const {
    return {{"msg_space", msg_space}, {"rand_space", rand_space}, {"enc", enc}};
}

uint64_t PkeSecretKey::decrypt(uint64_t c) const {
    return dec.at(c);
}

ClassicalFunction PkeSecretKey::dec_function() const {
    return ClassicalFunction(dec, msg_bits);
}

PkeKeys toy_pke_keygen(uint64_t msg_space, uint64_t rand_space, Rng &rng) {
    if (!is_power_of_two(msg_space) || rand_space == 0) {
        throw DimensionError("toy_pke_keygen: msg_space must be a power of two and rand_space positive");
    }
    uint64_t n = msg_space * rand_space;
    std::vector<uint64_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    PkeKeys keys;
    keys.pk = {msg_space, rand_space, perm};
    keys.sk.dec.assign(n, 0);
    keys.sk.msg_bits = log2_exact(msg_space);
    for (uint64_t i = 0; i < n; i++) {
        keys.sk.dec[perm[i]] = i / rand_space;
    }
    return keys;
}

Predicate pke_predicate(const PkePublicKey &pk) {
    uint64_t n = pk.ciphertext_space();
    return {std::vector<double>(n, 1.0 / static_cast<double>(n)), [pk](size_t i) { return pk.enc[i]; },
            [rs = pk.rand_space](size_t i, const Decoded &y) { return y.has_value() && *y == i / rs; }};
}

MoneyScheme::MoneyScheme(MoneyParams params)
    : params_(params), wm_(params.msg_space * params.rand_space, log2_exact(params.msg_space)) {
    if (!is_power_of_two(params.msg_space) || params.msg_space < 4) {
        throw DimensionError("MoneyScheme: msg_space must be a power of two, at least 4");
    }
}

MoneyKeys money_keygen(const MoneyScheme &scheme, Rng &rng) {
    PkeKeys pke = toy_pke_keygen(scheme.params().msg_space, scheme.params().rand_space, rng);
    CdKeys cd = cd_setup(scheme.wm(), rng);
    return {pke.pk, cd.pk, pke.sk, cd.sk};
}

nlohmann::json money_aux(const PkePublicKey &pk) {
    return {{"pke", pk.to_json()}};
}

CdProgram money_gennote(const MoneyScheme &scheme, const MoneyKeys &keys, SubspaceMoney &bank, Rng &rng) {
    return cd_generate(scheme.wm(), keys.cd_sk, bank, keys.pke_sk.dec_function(), rng);
}

MoneyVerifyResult money_verify(const MoneyScheme &scheme, const PkePublicKey &pke_pk, const WmPublicKey &cd_pk,
                               const SubspaceMoney &bank, const ClaimedProgram &note, const QuantumState &notes,
                               double gamma, uint64_t k, const std::string &measurement, Rng &rng) {
    MoneyVerifyResult r;
    r.check = cd_check(scheme.wm(), cd_pk, bank, money_aux(pke_pk), note, notes, rng);
    if (r.check.bit != 0) {
        return r;
    }
    if (measurement == "exact") {
        r.good = classical_goodness(note.circuit, pke_predicate(pke_pk), gamma) > 0.5;
    } else if (measurement == "sampled") {
        // The circuit is classical, so each challenge is a table lookup.
        auto need = static_cast<uint64_t>(std::ceil(gamma * static_cast<double>(k) - 1e-9));
        r.challenges = k;
        for (uint64_t i = 0; i < k; i++) {
            uint64_t m = uniform_below(rng, pke_pk.msg_space);
            uint64_t coins = uniform_below(rng, pke_pk.rand_space);
            r.correct += note.circuit(pke_pk.encrypt(m, coins)) == m;
        }
        r.good = r.correct >= need;
    } else {
        throw std::invalid_argument("money_verify: measurement must be exact or sampled");
    }
    r.accept = *r.good;
    return r;
}

void MoneyConfig::validate() const {
    if (lambda == 0 || lambda % 2 != 0 || lambda > kMaxCpLambda) {
        throw DimensionError("lambda must be even and in [2, " + std::to_string(kMaxCpLambda) + "]");
    }
    if (!is_power_of_two(msg_space) || msg_space < 4 || msg_space > (uint64_t{1} << 16)) {
        throw DimensionError("msg_space must be a power of two in [4, 2^16]");
    }
    if (rand_space == 0 || msg_space * rand_space > (uint64_t{1} << 16)) {
        throw DimensionError("msg_space * rand_space must be in [4, 2^16]");
    }
    if (!(gamma > 0 && gamma <= 1)) {
        throw std::invalid_argument("gamma must be in (0, 1]");
    }
    if (k == 0) {
        throw std::invalid_argument("k must be positive");
    }
    if (measurement != "exact" && measurement != "sampled") {
        throw std::invalid_argument("measurement must be exact or sampled");
    }
    if (trials == 0) {
        throw std::invalid_argument("trials must be positive");
    }
    if (adversary != "honest") {
        cd_pirate(adversary);
        if (2 * lambda > kMaxNoteQubits) {
            throw ResourceError("two notes of lambda qubits exceed " + std::to_string(kMaxNoteQubits) + " qubits");
        }
    }
}

nlohmann::json MoneyConfig::to_json() const {
    return {{"lambda", lambda}, {"msg_space", msg_space}, {"rand_space", rand_space},
            {"gamma", gamma},   {"k", k},                 {"measurement", measurement},
            {"trials", trials}, {"seed", seed},           {"adversary", adversary}};
}

GameReport run_money_game(const MoneyConfig &cfg) {
    cfg.validate();
    MoneyScheme scheme({cfg.lambda, cfg.msg_space, cfg.rand_space});
    const ToyWatermark &wm = scheme.wm();
    bool honest = cfg.adversary == "honest";
    const CdPirate *pirate = honest ? nullptr : &cd_pirate(cfg.adversary);
    bool exact = cfg.measurement == "exact";

    GameConfig shim;
    shim.trials = cfg.trials;
    shim.seed = cfg.seed;
    shim.threads = cfg.threads;
    shim.per_trial = cfg.per_trial;
    shim.adversary = cfg.adversary;
    std::vector<char> mismatch(cfg.trials, 0);
    GameReport report = run_trials("money", shim, [&](uint64_t i, Rng &rng) {
        MoneyKeys keys = money_keygen(scheme, rng);
        SubspaceMoney bank = scheme.new_bank();
        CdProgram note = money_gennote(scheme, keys, bank, rng);
        nlohmann::json aux = money_aux(keys.pke_pk);
        CdPirateOutput out;
        if (honest) {
            RegisterLayout one({{"note0", cfg.lambda}});
            out.notes = QuantumState::pure(one, note.note.state.vector());
            out.programs.push_back({note.circuit, note.note.serial, "note0"});
        } else {
            CdContext ctx{&wm, keys.cd_pk, aux, &bank, cfg.lambda};
            out = pirate->play({note}, ctx, rng);
            if (out.programs.size() != 2) {
                throw ProtocolViolation("a counterfeiter must output two notes");
            }
        }

        Rng clone = rng;
        QuantumState notes = out.notes;
        bool win = true;
        nlohmann::json rows = nlohmann::json::array();
        for (const auto &prog : out.programs) {
            MoneyVerifyResult v =
                money_verify(scheme, keys.pke_pk, keys.cd_pk, bank, prog, notes, cfg.gamma, cfg.k, cfg.measurement, rng);
            notes = v.check.post;
            win = win && v.accept;
            nlohmann::json row = {{"accept", v.accept}, {"reason", v.check.reason}};
            if (v.challenges > 0) {
                row["correct"] = v.correct;
            }
            rows.push_back(row);
        }

        // The same output judged as a copy-detection game.
        CdJudgement j = cd_judge(wm, keys.cd_pk, bank, aux, {note.note.serial}, out, pke_predicate(keys.pke_pk),
                                 cfg.gamma, clone);
        if (exact && j.win != win) {
            mismatch[i] = 1;
        }
        nlohmann::json detail = {{"notes", rows}, {"cd_win", j.win}, {"path", j.path}};
        std::optional<double> p;
        if (exact) {
            p = j.exact;
        }
        return TrialResult{win, p, detail};
    });

    if (honest) {
        double agree = 1 - static_cast<double>(ToyWatermark::kMarkPositions) /
                               static_cast<double>(cfg.msg_space * cfg.rand_space);
        if (exact && cfg.gamma <= agree + 1e-12) {
            report.derived_expectation = 1.0;
        }
    } else if (exact) {
        CdConfig view;
        view.lambda = cfg.lambda;
        view.domain = cfg.msg_space * cfg.rand_space;
        view.data_bits = log2_exact(cfg.msg_space);
        view.gamma = cfg.gamma;
        report.derived_expectation = pirate->expectation(view);
    }
    uint64_t mismatches = static_cast<uint64_t>(std::count(mismatch.begin(), mismatch.end(), 1));
    report.diagnostics = {{"measurement", cfg.measurement},
                          {"reduction_checked", exact},
                          {"reduction_mismatches", mismatches},
                          {"bound", std::ldexp(1.0, -static_cast<int>(cfg.lambda / 2))}};
    return report;
}

}  // namespace qcp
