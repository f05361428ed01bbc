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

// Copy detection from a watermarking scheme and a quantum money mini-scheme:
// a program is a marked classical circuit next to a banknote, and Check
// verifies the note and compares its serial with the circuit's mark.

#ifndef QCP_CD_H
#define QCP_CD_H

#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "qcp/games.h"

namespace qcp {

// ---------------------------------------------------------------------------
// Watermarking

struct WmPublicKey {
    std::vector<uint64_t> positions;
    bool operator==(const WmPublicKey &other) const = default;
};

struct WmMarkKey {
    uint64_t seed = 0;
    std::vector<uint64_t> positions;
    bool operator==(const WmMarkKey &other) const = default;
};

class WatermarkScheme {
   public:
    virtual ~WatermarkScheme() = default;
    virtual std::pair<WmPublicKey, WmMarkKey> setup(Rng &rng) const = 0;
    /// Samples f; `aux` receives the public information of the sampling.
    virtual ClassicalFunction sample(Rng &rng, nlohmann::json &aux) const = 0;
    virtual ClassicalFunction mark(const WmMarkKey &mk, const ClassicalFunction &f, uint64_t tau) const = 0;
    virtual std::optional<uint64_t> extract(const WmPublicKey &xk, const nlohmann::json &aux,
                                            const ClassicalFunction &circuit) const = 0;
    /// Marks are drawn from [0, message_space()).
    virtual uint64_t message_space() const = 0;
    virtual uint64_t domain() const = 0;
    virtual unsigned data_bits() const = 0;
    /// Declared failure bounds of the correctness triple.
    virtual double functionality_tolerance() const = 0;
    virtual double extraction_tolerance() const = 0;
    virtual double meaningfulness_tolerance() const = 0;
};

/// Tables over [domain] -> [2^data_bits]. Mark overwrites the outputs on a
/// secret set of kMarkPositions inputs with tau; Extract reads those inputs
/// and returns the value seen at least kMajority times.
class ToyWatermark : public WatermarkScheme {
   public:
    static constexpr size_t kMarkPositions = 4;
    static constexpr size_t kMajority = 3;

    ToyWatermark(uint64_t domain, unsigned data_bits);

    std::pair<WmPublicKey, WmMarkKey> setup(Rng &rng) const override;
    ClassicalFunction sample(Rng &rng, nlohmann::json &aux) const override;
    ClassicalFunction mark(const WmMarkKey &mk, const ClassicalFunction &f, uint64_t tau) const override;
    std::optional<uint64_t> extract(const WmPublicKey &xk, const nlohmann::json &aux,
                                    const ClassicalFunction &circuit) const override;
    uint64_t message_space() const override { return uint64_t{1} << data_bits_; }
    uint64_t domain() const override { return domain_; }
    unsigned data_bits() const override { return data_bits_; }
    /// kMarkPositions / domain.
    double functionality_tolerance() const override;
    double extraction_tolerance() const override { return 0.0; }
    /// Pr[some value fills >= kMajority of the positions of a uniform table].
    double meaningfulness_tolerance() const override;

   private:
    uint64_t domain_;
    unsigned data_bits_;
};

// ---------------------------------------------------------------------------
// Quantum money mini-scheme

struct Banknote {
    uint64_t serial = 0;
    QuantumState state;
};

struct VerifyResult {
    std::optional<uint64_t> serial;
    QuantumState post;
    /// Probability of the accepting branch before the measurement.
    double accept_prob = 0;
};

/// Subspace money: a note is (s, |A_s>) and the public registry maps each
/// minted serial to (A_s, A_s-perp). Ver projects onto A_s, applies H,
/// projects onto A_s-perp and applies H again; together these project onto
/// |A_s>.
class SubspaceMoney {
   public:
    /// Serials are drawn from [1, serial_space).
    SubspaceMoney(unsigned lambda, uint64_t serial_space);

    unsigned lambda() const { return lambda_; }
    uint64_t serial_space() const { return serial_space_; }

    /// Fresh note with an unused serial, registered for verification.
    Banknote mint(Rng &rng);
    bool registered(uint64_t serial) const { return registry_.count(serial) != 0; }
    const F2Subspace &subspace(uint64_t serial) const;
    size_t minted() const { return registry_.size(); }

    /// Runs Ver on register `reg` of `state` for the claimed serial.
    VerifyResult verify(const QuantumState &state, const std::string &reg, uint64_t serial, Rng &rng) const;
    /// |A_s>, the subspace state on a register of width lambda.
    Vec accept_vector(uint64_t serial) const;
    /// |A_s><A_s|, the accepting projector of Ver.
    Mat accept_projector(uint64_t serial) const;

   private:
    unsigned lambda_;
    uint64_t serial_space_;
    std::map<uint64_t, F2Subspace> registry_;
};

// ---------------------------------------------------------------------------
// Copy-detection scheme

struct CdKeys {
    WmPublicKey pk;
    WmMarkKey sk;
};

CdKeys cd_setup(const WatermarkScheme &wm, Rng &rng);

/// A copy-detection program: a marked classical circuit, the note's claimed
/// serial and the note register inside `notes`.
struct CdProgram {
    ClassicalFunction circuit;
    Banknote note;
};

CdProgram cd_generate(const WatermarkScheme &wm, const WmMarkKey &sk, SubspaceMoney &bank, const ClassicalFunction &f,
                      Rng &rng);

/// A program whose note lives in register `note_reg` of a shared state.
struct ClaimedProgram {
    ClassicalFunction circuit;
    uint64_t serial = 0;
    std::string note_reg;
};

struct CheckResult {
    /// 0 on pass.
    int bit = 1;
    std::optional<uint64_t> serial;
    std::optional<uint64_t> mark;
    QuantumState post;
    double accept_prob = 0;
    /// Empty on pass.
    std::string reason;
};

/// Check on one program inside a shared note state. Malformed programs
/// (wrong table shape, missing register, unknown serial) output 1.
CheckResult cd_check(const WatermarkScheme &wm, const WmPublicKey &pk, const SubspaceMoney &bank,
                     const nlohmann::json &aux, const ClaimedProgram &program, const QuantumState &notes, Rng &rng);

/// Single-program form; the collapsed program is returned in place.
CheckResult cd_check(const WatermarkScheme &wm, const WmPublicKey &pk, const SubspaceMoney &bank,
                     const nlohmann::json &aux, CdProgram &program, Rng &rng);

/// Exact threshold test of a classical circuit against f under D; returns
/// Tr[TI_gamma rho] (0 or 1 for a table).
double classical_goodness(const ClassicalFunction &circuit, const Predicate &e, double gamma);

// ---------------------------------------------------------------------------
// Copy-detection game

struct CdConfig {
    unsigned lambda = 8;
    uint64_t domain = 64;
    unsigned data_bits = 8;
    double gamma = 0.9;
    unsigned q = 1;
    uint64_t trials = 1000;
    uint64_t seed = 1;
    std::string pirate = "duplicate-everything";
    unsigned threads = 0;
    bool per_trial = true;

    void validate() const;
    nlohmann::json to_json() const;
};

/// Public view handed to a copy-detection pirate.
struct CdContext {
    const WatermarkScheme *wm;
    WmPublicKey pk;
    nlohmann::json aux;
    const SubspaceMoney *bank;
    unsigned lambda;
};

struct CdPirateOutput {
    std::vector<ClaimedProgram> programs;
    QuantumState notes;
};

struct CdPirate {
    std::string name;
    std::function<CdPirateOutput(const std::vector<CdProgram> &, const CdContext &, Rng &)> play;
    std::function<std::optional<double>(const CdConfig &)> expectation;
};

/// duplicate-everything, mark-eraser, honest-plus-dummy.
const std::vector<CdPirate> &cd_pirates();
const CdPirate &cd_pirate(const std::string &name);

/// Largest joint note state the game will hold.
inline constexpr unsigned kMaxNoteQubits = 20;

/// Result of judging q + 1 programs: Check on each, then the threshold test.
struct CdJudgement {
    bool win = false;
    double exact = 0;
    std::vector<std::optional<uint64_t>> serials;
    std::vector<std::optional<uint64_t>> marks;
    std::vector<bool> passed;
    std::vector<bool> good;
    /// "E" (some mark outside the issued serials) or "E'" (all inside).
    std::string path;
    nlohmann::json to_json() const;
};

CdJudgement cd_judge(const WatermarkScheme &wm, const WmPublicKey &pk, const SubspaceMoney &bank,
                     const nlohmann::json &aux, const std::vector<uint64_t> &issued, const CdPirateOutput &out,
                     const Predicate &goodness, double gamma, Rng &rng);

GameReport run_copy_detection_game(const CdConfig &cfg, const CdPirate &pirate);

}  // namespace qcp

#endif
