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

#include "qcp/cd.h"

#include <algorithm>
#include <cmath>

namespace qcp {

namespace {

Mat membership_projector(const F2Subspace &s) {
    auto dim = static_cast<Eigen::Index>(uint64_t{1} << s.n());
    Mat p = Mat::Zero(dim, dim);
    for (Eigen::Index v = 0; v < dim; v++) {
        if (s.contains(static_cast<uint64_t>(v))) {
            p(v, v) = 1.0;
        }
    }
    return p;
}

QuantumState rename_single(const QuantumState &s, const std::string &name) {
    RegisterLayout layout({{name, s.layout().total_qubits()}});
    return s.is_pure() ? QuantumState::pure(layout, s.vector()) : QuantumState::mixed(layout, s.matrix());
}

std::string note_name(size_t i) {
    return "note" + std::to_string(i);
}

}  // namespace

// ---------------------------------------------------------------------------
// Toy watermark

ToyWatermark::ToyWatermark(uint64_t domain, unsigned data_bits) : domain_(domain), data_bits_(data_bits) {
    if (domain < kMarkPositions) {
        throw DimensionError("ToyWatermark: domain smaller than the mark");
    }
    if (data_bits == 0 || data_bits > 16) {
        throw DimensionError("ToyWatermark: data_bits must be in [1, 16]");
    }
}

std::pair<WmPublicKey, WmMarkKey> ToyWatermark::setup(Rng &rng) const {
    WmMarkKey mk;
    mk.seed = rng();
    Rng local(mk.seed);
    while (mk.positions.size() < kMarkPositions) {
        uint64_t x = uniform_below(local, domain_);
        if (std::find(mk.positions.begin(), mk.positions.end(), x) == mk.positions.end()) {
            mk.positions.push_back(x);
        }
    }
    return {WmPublicKey{mk.positions}, mk};
}

ClassicalFunction ToyWatermark::sample(Rng &rng, nlohmann::json &aux) const {
    aux = {{"domain", domain_}, {"data_bits", data_bits_}};
    return ClassicalFunction::random(domain_, data_bits_, rng);
}

ClassicalFunction ToyWatermark::mark(const WmMarkKey &mk, const ClassicalFunction &f, uint64_t tau) const {
    if (tau >= message_space()) {
        throw std::invalid_argument("ToyWatermark::mark: message outside the message space");
    }
    if (f.domain() != domain_ || f.out_bits() != data_bits_) {
        throw DimensionError("ToyWatermark::mark: circuit shape mismatch");
    }
    std::vector<uint64_t> table = f.table();
    for (uint64_t p : mk.positions) {
        table.at(p) = tau;
    }
    return ClassicalFunction(std::move(table), data_bits_);
}

std::optional<uint64_t> ToyWatermark::extract(const WmPublicKey &xk, const nlohmann::json &,
                                              const ClassicalFunction &circuit) const {
    if (circuit.domain() != domain_ || circuit.out_bits() != data_bits_) {
        return std::nullopt;
    }
    std::map<uint64_t, size_t> counts;
    for (uint64_t p : xk.positions) {
        if (p >= domain_) {
            return std::nullopt;
        }
        counts[circuit(p)]++;
    }
    for (const auto &[value, c] : counts) {
        if (c >= kMajority) {
            return value;
        }
    }
    return std::nullopt;
}

double ToyWatermark::functionality_tolerance() const {
    return static_cast<double>(kMarkPositions) / static_cast<double>(domain_);
}

double ToyWatermark::meaningfulness_tolerance() const {
    // Some value on all 4 positions, or on exactly 3 of them.
    double m = static_cast<double>(message_space());
    return (1 + 4 * (m - 1)) / (m * m * m);
}

// ---------------------------------------------------------------------------
// Subspace money

SubspaceMoney::SubspaceMoney(unsigned lambda, uint64_t serial_space) : lambda_(lambda), serial_space_(serial_space) {
    if (lambda == 0 || lambda % 2 != 0 || lambda > kMaxCpLambda) {
        throw DimensionError("SubspaceMoney: lambda must be even and at most " + std::to_string(kMaxCpLambda));
    }
    if (serial_space < 2) {
        throw DimensionError("SubspaceMoney: serial space needs at least one nonzero serial");
    }
}

Banknote SubspaceMoney::mint(Rng &rng) {
    if (registry_.size() + 1 >= serial_space_) {
        throw ResourceError("SubspaceMoney::mint: serial space exhausted");
    }
    uint64_t s = 0;
    do {
        s = 1 + uniform_below(rng, serial_space_ - 1);
    } while (registry_.count(s) != 0);
    F2Subspace a = rand_subspace(lambda_, lambda_ / 2, rng);
    registry_.emplace(s, a);
    return {s, prepare_subspace_state(a, "note")};
}

const F2Subspace &SubspaceMoney::subspace(uint64_t serial) const {
    auto it = registry_.find(serial);
    if (it == registry_.end()) {
        throw std::out_of_range("SubspaceMoney: unknown serial " + std::to_string(serial));
    }
    return it->second;
}

Vec SubspaceMoney::accept_vector(uint64_t serial) const {
    return prepare_subspace_state(subspace(serial), "note").vector();
}

Mat SubspaceMoney::accept_projector(uint64_t serial) const {
    Vec a = accept_vector(serial);
    return a * a.adjoint();
}

VerifyResult SubspaceMoney::verify(const QuantumState &state, const std::string &reg, uint64_t serial,
                                   Rng &rng) const {
    if (!registered(serial) || !state.layout().has(reg) || state.layout().width(reg) != lambda_) {
        return {std::nullopt, state, 0.0};
    }
    const F2Subspace &a = subspace(serial);
    double p = rank_one_expectation(state, {reg}, prepare_subspace_state(a, "note").vector());
    GentleResult g1 = gentle_measure(state, membership_projector(a), rng, {reg});
    if (g1.outcome != 0) {
        return {std::nullopt, g1.post, p};
    }
    QuantumState s = hadamard_all(g1.post, reg);
    GentleResult g2 = gentle_measure(s, membership_projector(a.dual()), rng, {reg});
    s = hadamard_all(g2.post, reg);
    if (g2.outcome != 0) {
        return {std::nullopt, s, p};
    }
    return {serial, s, p};
}

// ---------------------------------------------------------------------------
// Scheme

CdKeys cd_setup(const WatermarkScheme &wm, Rng &rng) {
    auto [xk, mk] = wm.setup(rng);
    return {xk, mk};
}

CdProgram cd_generate(const WatermarkScheme &wm, const WmMarkKey &sk, SubspaceMoney &bank, const ClassicalFunction &f,
                      Rng &rng) {
    if (bank.serial_space() > wm.message_space()) {
        throw DimensionError("cd_generate: serial space must fit in the mark message space");
    }
    Banknote note = bank.mint(rng);
    return {wm.mark(sk, f, note.serial), std::move(note)};
}

CheckResult cd_check(const WatermarkScheme &wm, const WmPublicKey &pk, const SubspaceMoney &bank,
                     const nlohmann::json &aux, const ClaimedProgram &program, const QuantumState &notes, Rng &rng) {
    CheckResult r;
    r.post = notes;
    if (program.circuit.domain() != wm.domain() || program.circuit.out_bits() != wm.data_bits()) {
        r.reason = "malformed circuit";
        return r;
    }
    if (!notes.layout().has(program.note_reg) || notes.layout().width(program.note_reg) != bank.lambda()) {
        r.reason = "malformed note";
        return r;
    }
    // The circuit register is classical already; measuring it is the identity.
    r.mark = wm.extract(pk, aux, program.circuit);
    if (!bank.registered(program.serial)) {
        r.reason = "unknown serial";
        return r;
    }
    VerifyResult v = bank.verify(notes, program.note_reg, program.serial, rng);
    r.post = std::move(v.post);
    r.serial = v.serial;
    r.accept_prob = v.accept_prob;
    if (!v.serial) {
        r.reason = "note rejected";
        return r;
    }
    if (r.mark != v.serial) {
        r.reason = "mark mismatch";
        return r;
    }
    r.bit = 0;
    return r;
}

CheckResult cd_check(const WatermarkScheme &wm, const WmPublicKey &pk, const SubspaceMoney &bank,
                     const nlohmann::json &aux, CdProgram &program, Rng &rng) {
    QuantumState notes = rename_single(program.note.state, "note");
    CheckResult r = cd_check(wm, pk, bank, aux, {program.circuit, program.note.serial, "note"}, notes, rng);
    program.note.state = r.post;
    return r;
}

double classical_goodness(const ClassicalFunction &circuit, const Predicate &e, double gamma) {
    ProgramSpec spec = table_program_spec({answer_table(circuit)}, circuit.domain(), circuit.out_bits());
    Mat ti = threshold_impl(proj_impl(goodness_povm_predicate(spec, e)), gamma);
    return std::real(ti(0, 0));
}

// ---------------------------------------------------------------------------
// Game

void CdConfig::validate() const {
    if (lambda == 0 || lambda % 2 != 0 || lambda > kMaxCpLambda) {
        throw DimensionError("lambda must be even and in [2, " + std::to_string(kMaxCpLambda) + "]");
    }
    if (domain < ToyWatermark::kMarkPositions || domain > (uint64_t{1} << 16)) {
        throw DimensionError("domain must be in [4, 2^16]");
    }
    if (data_bits == 0 || data_bits > 16) {
        throw DimensionError("data_bits must be in [1, 16]");
    }
    if (!(gamma > 0 && gamma <= 1)) {
        throw std::invalid_argument("gamma must be in (0, 1]");
    }
    if (q == 0 || q + 1 >= (uint64_t{1} << data_bits)) {
        throw std::invalid_argument("q must be positive and below the serial space");
    }
    if ((q + 1) * lambda > kMaxNoteQubits) {
        throw ResourceError("(q + 1) * lambda exceeds " + std::to_string(kMaxNoteQubits) + " note qubits");
    }
    if (trials == 0) {
        throw std::invalid_argument("trials must be positive");
    }
}

nlohmann::json CdConfig::to_json() const {
    return {{"lambda", lambda}, {"domain", domain}, {"data_bits", data_bits}, {"gamma", gamma},
            {"q", q},           {"trials", trials}, {"seed", seed},           {"pirate", pirate}};
}

namespace {

/// Joint note state of the q issued programs, registers note0 .. note{q-1}.
QuantumState issued_notes(const std::vector<CdProgram> &programs) {
    QuantumState s;
    for (size_t i = 0; i < programs.size(); i++) {
        s = tensor(s, rename_single(programs[i].note.state, note_name(i)));
    }
    return s;
}

std::vector<ClaimedProgram> pass_through(const std::vector<CdProgram> &programs) {
    std::vector<ClaimedProgram> out;
    for (size_t i = 0; i < programs.size(); i++) {
        out.push_back({programs[i].circuit, programs[i].note.serial, note_name(i)});
    }
    return out;
}

std::optional<double> marked_copy_rate(const CdConfig &cfg) {
    // Valid while the marked circuit stays gamma-good.
    double agree = 1 - static_cast<double>(ToyWatermark::kMarkPositions) / static_cast<double>(cfg.domain);
    if (cfg.gamma > agree + 1e-12) {
        return std::nullopt;
    }
    return std::ldexp(1.0, -static_cast<int>(cfg.lambda));
}

std::vector<CdPirate> make_cd_pirates() {
    std::vector<CdPirate> out;
    out.push_back({"duplicate-everything",
                   [](const std::vector<CdProgram> &programs, const CdContext &, Rng &rng) {
                       // Copy the first circuit; measure its note and prepare the
                       // outcome twice. The other programs pass through.
                       const CdProgram &p0 = programs.front();
                       uint64_t a = measure_register(p0.note.state, "note", rng).outcome;
                       RegisterLayout one({{"note", p0.note.state.layout().total_qubits()}});
                       QuantumState copy = QuantumState::basis(one, a);
                       CdPirateOutput res;
                       res.notes = tensor(rename_single(copy, note_name(0)), rename_single(copy, note_name(1)));
                       res.programs.push_back({p0.circuit, p0.note.serial, note_name(0)});
                       res.programs.push_back({p0.circuit, p0.note.serial, note_name(1)});
                       for (size_t i = 1; i < programs.size(); i++) {
                           res.notes = tensor(res.notes, rename_single(programs[i].note.state, note_name(i + 1)));
                           res.programs.push_back({programs[i].circuit, programs[i].note.serial, note_name(i + 1)});
                       }
                       return res;
                   },
                   marked_copy_rate});
    out.push_back({"mark-eraser",
                   [](const std::vector<CdProgram> &programs, const CdContext &ctx, Rng &rng) {
                       // Overwrite the publicly readable mark positions with a
                       // fresh serial and attach a self-made note for it.
                       CdPirateOutput res{pass_through(programs), issued_notes(programs)};
                       uint64_t space = ctx.wm->message_space();
                       uint64_t own = 0;
                       auto issued = [&](uint64_t s) {
                           return std::any_of(programs.begin(), programs.end(),
                                              [&](const CdProgram &p) { return p.note.serial == s; });
                       };
                       do {
                           own = 1 + uniform_below(rng, space - 1);
                       } while (issued(own));
                       ClassicalFunction remarked = ctx.wm->mark(WmMarkKey{0, ctx.pk.positions}, programs.front().circuit, own);
                       F2Subspace b = rand_subspace(ctx.lambda, ctx.lambda / 2, rng);
                       size_t slot = programs.size();
                       res.notes = tensor(res.notes, prepare_subspace_state(b, note_name(slot)));
                       res.programs.push_back({remarked, own, note_name(slot)});
                       return res;
                   },
                   [](const CdConfig &) -> std::optional<double> { return 0.0; }});
    out.push_back({"honest-plus-dummy",
                   [](const std::vector<CdProgram> &programs, const CdContext &ctx, Rng &) {
                       CdPirateOutput res{pass_through(programs), issued_notes(programs)};
                       size_t slot = programs.size();
                       ClassicalFunction zero(std::vector<uint64_t>(ctx.wm->domain(), 0), ctx.wm->data_bits());
                       RegisterLayout one({{note_name(slot), ctx.lambda}});
                       res.notes = tensor(res.notes, QuantumState::zeros(one));
                       res.programs.push_back({zero, programs.front().note.serial, note_name(slot)});
                       return res;
                   },
                   [](const CdConfig &) -> std::optional<double> { return 0.0; }});
    return out;
}

nlohmann::json optional_json(const std::optional<uint64_t> &v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

const std::vector<CdPirate> &cd_pirates() {
    static const std::vector<CdPirate> all = make_cd_pirates();
    return all;
}

const CdPirate &cd_pirate(const std::string &name) {
    for (const auto &p : cd_pirates()) {
        if (p.name == name) {
            return p;
        }
    }
    throw std::invalid_argument("unknown copy-detection pirate '" + name +
                                "' (known: duplicate-everything, mark-eraser, honest-plus-dummy)");
}

nlohmann::json CdJudgement::to_json() const {
    nlohmann::json s = nlohmann::json::array();
    nlohmann::json m = nlohmann::json::array();
    for (size_t i = 0; i < serials.size(); i++) {
        s.push_back(optional_json(serials[i]));
        m.push_back(optional_json(marks[i]));
    }
    return {{"serials", s}, {"marks", m}, {"passed", passed}, {"good", good}, {"path", path}};
}

CdJudgement cd_judge(const WatermarkScheme &wm, const WmPublicKey &pk, const SubspaceMoney &bank,
                     const nlohmann::json &aux, const std::vector<uint64_t> &issued, const CdPirateOutput &out,
                     const Predicate &goodness, double gamma, Rng &rng) {
    auto is_issued = [&](const std::optional<uint64_t> &s) {
        return s && std::find(issued.begin(), issued.end(), *s) != issued.end();
    };
    CdJudgement j;
    QuantumState notes = out.notes;
    bool all_pass = true;
    for (const auto &prog : out.programs) {
        CheckResult c = cd_check(wm, pk, bank, aux, prog, notes, rng);
        notes = c.post;
        j.serials.push_back(c.serial);
        j.marks.push_back(c.mark);
        j.passed.push_back(c.bit == 0);
        all_pass = all_pass && c.bit == 0;
        if (c.bit == 0) {
            double again = rank_one_expectation(notes, {prog.note_reg}, bank.accept_vector(prog.serial));
            if (again < 1 - 1e-9) {
                throw InvariantViolation("cd_check: a passing program fails a repeated check");
            }
        }
    }
    bool all_good = true;
    for (const auto &prog : out.programs) {
        bool g = classical_goodness(prog.circuit, goodness, gamma) > 0.5;
        j.good.push_back(g);
        all_good = all_good && g;
    }
    j.win = all_pass && all_good;

    // Exact pass probability of the whole sequence of checks.
    double exact = all_good ? 1.0 : 0.0;
    QuantumState cur = out.notes;
    for (const auto &prog : out.programs) {
        if (exact == 0) {
            break;
        }
        bool classical_ok = prog.circuit.domain() == wm.domain() && prog.circuit.out_bits() == wm.data_bits() &&
                            cur.layout().has(prog.note_reg) && bank.registered(prog.serial) &&
                            wm.extract(pk, aux, prog.circuit) == prog.serial;
        if (!classical_ok) {
            exact = 0;
            break;
        }
        Vec a = bank.accept_vector(prog.serial);
        double p = rank_one_expectation(cur, {prog.note_reg}, a);
        if (p <= 1e-15) {
            exact = 0;
            break;
        }
        exact *= p;
        // Postselecting a pure state onto a rank-one projector meets the gentle
        // bound with equality, so the direct projection loses no check.
        cur = rank_one_postselect(cur, {prog.note_reg}, a);
    }
    j.exact = exact;

    bool marks_issued = std::all_of(j.marks.begin(), j.marks.end(), is_issued);
    j.path = marks_issued ? "E'" : "E";
    if (all_pass) {
        bool extract_matches = true;
        bool serials_issued = true;
        for (size_t i = 0; i < j.serials.size(); i++) {
            extract_matches = extract_matches && j.marks[i] == j.serials[i];
            serials_issued = serials_issued && is_issued(j.serials[i]);
        }
        bool e = extract_matches && !serials_issued;
        bool e_prime = extract_matches && serials_issued;
        if (e == e_prime) {
            throw InvariantViolation("cd_judge: a passing output must fall in exactly one of E, E'");
        }
        j.path = e ? "E" : "E'";
    }
    return j;
}

GameReport run_copy_detection_game(const CdConfig &cfg, const CdPirate &pirate) {
    cfg.validate();
    ToyWatermark wm(cfg.domain, cfg.data_bits);
    GameConfig shim;
    shim.trials = cfg.trials;
    shim.seed = cfg.seed;
    shim.threads = cfg.threads;
    shim.per_trial = cfg.per_trial;
    shim.adversary = pirate.name;
    std::vector<std::string> paths(cfg.trials);
    std::vector<char> wins(cfg.trials);
    std::vector<char> passes(cfg.trials);
    GameReport report = run_trials("copy-detection", shim, [&](uint64_t i, Rng &rng) {
        CdKeys keys = cd_setup(wm, rng);
        nlohmann::json aux;
        ClassicalFunction f = wm.sample(rng, aux);
        SubspaceMoney bank(cfg.lambda, wm.message_space());
        std::vector<CdProgram> programs;
        std::vector<uint64_t> issued;
        for (unsigned k = 0; k < cfg.q; k++) {
            programs.push_back(cd_generate(wm, keys.sk, bank, f, rng));
            issued.push_back(programs.back().note.serial);
        }
        CdContext ctx{&wm, keys.pk, aux, &bank, cfg.lambda};
        CdPirateOutput out = pirate.play(programs, ctx, rng);
        if (out.programs.size() != cfg.q + 1) {
            throw ProtocolViolation("copy-detection pirate must output q + 1 programs");
        }
        if (out.notes.layout().total_qubits() > kMaxNoteQubits) {
            throw ResourceError("copy-detection pirate output exceeds the note-qubit cap");
        }
        Predicate e = equality_predicate(f, uniform_distribution(cfg.domain));
        CdJudgement j = cd_judge(wm, keys.pk, bank, aux, issued, out, e, cfg.gamma, rng);
        paths[i] = j.path;
        wins[i] = j.win ? 1 : 0;
        passes[i] = std::all_of(j.passed.begin(), j.passed.end(), [](bool b) { return b; }) ? 1 : 0;
        return TrialResult{j.win, j.exact, j.to_json()};
    });
    report.derived_expectation = pirate.expectation(cfg);
    uint64_t path_e = 0;
    uint64_t path_ep = 0;
    uint64_t wins_e = 0;
    uint64_t wins_ep = 0;
    uint64_t passes_e = 0;
    uint64_t passes_ep = 0;
    for (size_t i = 0; i < paths.size(); i++) {
        bool e = paths[i] == "E";
        (e ? path_e : path_ep)++;
        if (wins[i]) {
            (e ? wins_e : wins_ep)++;
        }
        if (passes[i]) {
            (e ? passes_e : passes_ep)++;
        }
    }
    report.diagnostics = {{"path_E", path_e},
                          {"path_E_prime", path_ep},
                          {"wins_E", wins_e},
                          {"wins_E_prime", wins_ep},
                          {"passes_E", passes_e},
                          {"passes_E_prime", passes_ep},
                          {"q", cfg.q},
                          {"lambda", cfg.lambda},
                          {"bound", std::ldexp(1.0, -static_cast<int>(cfg.lambda / 2))}};
    return report;
}

}  // namespace qcp
