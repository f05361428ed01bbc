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

#ifndef QCP_MEASURE_H
#define QCP_MEASURE_H

#include <functional>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "qcp/oracles.h"
#include "qcp/qsim.h"

namespace qcp {

/// Decoded program output; nullopt is the invalid symbol.
using Decoded = std::optional<uint64_t>;

/// Decoder for a (1 + data_bits)-wide validity-encoded output register.
std::function<Decoded(uint64_t)> validity_decoder(unsigned data_bits);

/// Everything needed to evaluate a program except its state: the program
/// registers, zero-initialized ancillas, the circuit U_x for every input, and
/// the output registers read at the end.
struct ProgramSpec {
    RegisterLayout program;
    RegisterLayout ancillas;
    std::function<Circuit(uint64_t x)> evaluator;
    std::vector<std::string> output;
    std::function<Decoded(uint64_t raw)> decode;
    OracleBinding oracles;

    /// program + ancillas.
    RegisterLayout system() const { return program + ancillas; }
    /// Same spec with some oracle slots rebound.
    ProgramSpec rebound(const OracleBinding &overrides) const;
};

/// Classical lookup program: program basis state j answers tables[j][x]
/// (nullopt answers the invalid symbol). Registers are prefix + "prog" and a
/// validity-encoded output prefix + "out"; there are no oracle slots.
ProgramSpec table_program_spec(const std::vector<std::vector<Decoded>> &tables, uint64_t domain, unsigned data_bits,
                               const std::string &prefix = "");
/// Table of a function, for use in table_program_spec.
std::vector<Decoded> answer_table(const ClassicalFunction &f);

struct QuantumProgram {
    QuantumState state;
    ProgramSpec spec;
};

/// A bipartite pirate output. `state` covers the program registers of both
/// specs and possibly extra purifying registers; register names must not
/// collide.
struct PirateOutput {
    QuantumState state;
    ProgramSpec r1;
    ProgramSpec r2;
};

/// Output distribution of a program on input x (decoded value -> probability,
/// with the invalid symbol stored under key nullopt).
std::vector<std::pair<Decoded, double>> evaluate_distribution(const QuantumState &program_state,
                                                              const ProgramSpec &spec, uint64_t x);

/// Binary POVM (P, I - P).
class BinaryPovm {
   public:
    explicit BinaryPovm(Mat p);
    const Mat &p() const { return p_; }
    Mat q() const { return Mat::Identity(p_.rows(), p_.cols()) - p_; }
    Eigen::Index dim() const { return p_.rows(); }

   private:
    Mat p_;
};

/// Spectral form {(p_i, Pi_i)} of a binary POVM, p_i descending.
struct ProjectiveImplementation {
    std::vector<double> values;
    std::vector<Mat> projectors;

    Eigen::Index dim() const { return projectors.empty() ? 0 : projectors.front().rows(); }
    Mat reconstruct() const;
};

ProjectiveImplementation proj_impl(const BinaryPovm &povm, double merge_tol = kEigenMergeTol);

struct ProjImpOutcome {
    double p;
    size_t index;
    QuantumState post;
    double prob;
};

/// Measures `pi` on registers `regs` of `state` (all registers when empty).
ProjImpOutcome apply_proj_impl(const ProjectiveImplementation &pi, const QuantumState &state, Rng &rng,
                               const std::vector<std::string> &regs = {});

/// Projector onto the eigenspaces with p_i >= gamma (with 1e-9 slack).
Mat threshold_impl(const ProjectiveImplementation &pi, double gamma);

/// Randomized predicate: coin r drawn with probs[r] picks the input x(r) and
/// an acceptance rule on the decoded output.
struct Predicate {
    std::vector<double> probs;
    std::function<uint64_t(size_t r)> input;
    std::function<bool(size_t r, const Decoded &y)> accept;
};

/// Output-equality predicate of f under input distribution `d` (probabilities over [N]).
Predicate equality_predicate(const ClassicalFunction &f, const std::vector<double> &d);
std::vector<double> uniform_distribution(uint64_t n);

/// A sampler of function instances together with their intended predicate.
struct AppInstance {
    ClassicalFunction f;
    nlohmann::json aux;
    Predicate predicate;
};
struct CryptoApplication {
    std::string name;
    std::function<AppInstance(Rng &)> sample;
};

/// P_x = U_x^dag V U_x compressed onto the program register (ancillas start
/// and are traced in |0>), for one input and acceptance rule.
Mat program_operator(const ProgramSpec &spec, uint64_t x, const std::function<bool(const Decoded &)> &accept);

/// P_D = sum_x D(x) P_{f,x}.
BinaryPovm goodness_povm(const ProgramSpec &spec, const ClassicalFunction &f, const std::vector<double> &d);
/// P = sum_r Pr[r] U_{x(r)}^dag V_r U_{x(r)}.
BinaryPovm goodness_povm_predicate(const ProgramSpec &spec, const Predicate &e);

/// Coin-controlled family of projectors on a system space, with the program
/// register embedded into the system by `embed` (an isometry).
struct ControlledProjection {
    std::vector<double> coin_probs;
    std::vector<Mat> family;
    Mat embed;

    unsigned coin_qubits() const { return index_bits(coin_probs.size()); }
    /// Sum_r Pr[r] embed^dag P_r embed.
    BinaryPovm mixture() const;
    /// sum_r |r><r| (x) P_r on (coin, system).
    Mat control_projector() const;
    /// sum_r sqrt(Pr[r]) |r>.
    Vec coin_state() const;
};

inline constexpr unsigned kMaxControlledQubits = 12;

/// Family acting directly on the program register.
ControlledProjection controlled_projection(std::vector<Mat> family, std::vector<double> coin_probs);
/// Family {U_x^dag V_r U_x} of a program spec on (program, ancillas).
ControlledProjection controlled_projection(const ProgramSpec &spec, const Predicate &e);

/// One run of the control-register measurement on a pure program state:
/// returns 0 when CProj accepts.
int measure_controlled(const ControlledProjection &cp, const QuantumState &program_state, Rng &rng);

/// Real-valued distribution given by support points and probabilities.
struct ScalarDistribution {
    std::vector<double> values;
    std::vector<double> probs;

    static ScalarDistribution empirical(const std::vector<double> &samples);
    static ScalarDistribution point(double v) { return {{v}, {1.0}}; }
};

/// Smallest delta such that both shifted CDF inequalities hold.
double shift_distance(const ScalarDistribution &d0, const ScalarDistribution &d1, double eps);

enum class ApiBackend {
    // Alternating-projector estimator simulated exactly in the eigenbasis.
    Spectral,
    // Same estimator run on an explicit (coin, system) state.
    Explicit,
    // Independent coins per round with sqrt(P_r) Kraus operators.
    FreshCoin,
};

struct ApiOptions {
    ApiBackend backend = ApiBackend::Spectral;
    double c = 2.0;
    uint64_t max_restore_steps = 100000;
};

struct ApiResult {
    double estimate;
    QuantumState post;
    uint64_t rounds;
    uint64_t restore_steps;
    bool restored;
};

/// Number of estimation rounds t = ceil(c ln(2/delta) / eps^2).
uint64_t api_rounds(double eps, double delta, double c = 2.0);

/// Approximate projective implementation of the controlled projection's
/// mixture on registers `regs` of `state`.
ApiResult sampled_api(const QuantumState &state, const std::vector<std::string> &regs,
                      const ControlledProjection &cp, double eps, double delta, Rng &rng,
                      const ApiOptions &options = {});
/// Spectral backend given a precomputed decomposition.
ApiResult sampled_api(const QuantumState &state, const std::vector<std::string> &regs,
                      const ProjectiveImplementation &pi, double eps, double delta, Rng &rng, double c = 2.0,
                      uint64_t max_restore_steps = 100000);

struct JointThresholdResult {
    int b1;
    int b2;
    QuantumState post;
    /// Exact Tr[(TI (x) TI) sigma].
    double both_good_prob;
};

/// TI_gamma (x) TI_gamma on the two program registers of a pirate output.
JointThresholdResult joint_threshold_measure(const QuantumState &state, const std::vector<std::string> &regs1,
                                             const Mat &ti1, const std::vector<std::string> &regs2, const Mat &ti2,
                                             Rng &rng);
JointThresholdResult joint_threshold_measure(const PirateOutput &pirate, const BinaryPovm &povm1,
                                             const BinaryPovm &povm2, double gamma, Rng &rng);

/// Exact probability that both registers pass.
double joint_good_probability(const QuantumState &state, const std::vector<std::string> &regs1, const Mat &ti1,
                              const std::vector<std::string> &regs2, const Mat &ti2);

/// {"gamma", "trace", "shots", "ci95"}; ci95 is null without shots.
nlohmann::json measurement_report(double gamma, std::optional<double> trace, uint64_t shots, uint64_t accepted);

}  // namespace qcp

#endif
