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

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "qcp/cd.h"
#include "qcp/money.h"
#include "report.h"
#include "suite.h"

using namespace qcp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitConfig = 2;
constexpr int kExitAcceptance = 3;

struct Output {
    std::string out;
    bool timestamp = false;

    void add_to(CLI::App *app) {
        app->add_option("--out", out, "Write the JSON report here (stdout when omitted)");
        app->add_flag("--timestamp", timestamp, "Record the wall-clock time in the manifest");
    }

    void emit(const std::string &subcommand, const nlohmann::json &config, uint64_t seed,
              const nlohmann::json &results, const std::string &summary) const {
        RunManifest m{subcommand, config, seed, artifact_version(), std::nullopt};
        if (timestamp) {
            m.timestamp = utc_timestamp_now();
        }
        std::string text = dump_report(make_report(m, results));
        if (out.empty()) {
            std::cout << text;
        } else {
            write_text_file(out, text);
            std::cout << summary << "\n";
        }
    }
};

std::string rate_summary(const GameReport &r) {
    std::ostringstream s;
    auto [lo, hi] = r.ci95();
    s << r.game << "/" << r.adversary << ": " << r.wins << "/" << r.trials << " wins, rate " << r.win_rate()
      << " ci95 [" << lo << ", " << hi << "]";
    if (r.derived_expectation) {
        s << ", derived " << *r.derived_expectation;
    }
    return s.str();
}

// ---------------------------------------------------------------------------
// demo-cp

struct DemoCp {
    unsigned lambda = 8;
    uint64_t domain = 16;
    unsigned data_bits = 2;
    uint64_t evals = 20;
    uint64_t seed = 1;
    std::string transcript;
    Output output;

    nlohmann::json config() const {
        return {{"lambda", lambda}, {"domain", domain}, {"data_bits", data_bits}, {"evals", evals}, {"seed", seed}};
    }

    void run() const {
        if (lambda == 0 || lambda % 2 != 0 || lambda > 12) {
            throw DimensionError("demo-cp: lambda must be even and at most 12");
        }
        if (domain == 0 || domain > 256 || data_bits == 0 || data_bits > 4 || evals == 0) {
            throw DimensionError("demo-cp: need 1 <= domain <= 256, 1 <= data_bits <= 4, evals >= 1");
        }
        Rng rng(seed);
        CpSecretKey sk = cp_setup(lambda, rng);
        ClassicalFunction f = ClassicalFunction::random(domain, data_bits, rng);
        CpProgram prog = cp_generate(sk, f, rng);
        Vec initial = prog.state().vector();
        std::ofstream csv;
        if (!transcript.empty()) {
            csv.open(transcript, std::ios::binary | std::ios::trunc);
            if (!csv) {
                throw std::runtime_error("cannot open '" + transcript + "' for writing");
            }
        }
        std::vector<double> per_call;
        std::vector<uint64_t> inputs;
        uint64_t correct = 0;
        double first_stage = 0;
        for (uint64_t i = 0; i < evals; i++) {
            uint64_t x = uniform_below(rng, domain);
            if (csv.is_open()) {
                ProgramSpec spec = prog.spec();
                QuantumState sys = tensor(prog.state(), QuantumState::zeros(spec.ancillas));
                Vec psi = sys.vector();
                Transcript t;
                run_circuit(spec.evaluator(x), psi, sys.layout(), spec.oracles, &t);
                write_transcript_csv(csv, t, i, i == 0);
            }
            ComputeResult c = prog.compute_postselected(x);
            if (i == 0) {
                first_stage = c.first_stage_prob;
            }
            per_call.push_back(c.success_prob);
            inputs.push_back(x);
            correct += c.y == f(x) ? 1 : 0;
        }
        double final_fidelity = std::norm(initial.dot(prog.state().vector()));
        auto [lo, hi] = wilson_ci95(correct, evals);
        nlohmann::json results = {{"wins", correct},
                                  {"trials", evals},
                                  {"win_rate", static_cast<double>(correct) / static_cast<double>(evals)},
                                  {"ci95", {lo, hi}},
                                  {"derived_expectation", nullptr},
                                  {"lambda", lambda},
                                  {"evals", evals},
                                  {"per_call_success", per_call},
                                  {"final_fidelity", final_fidelity},
                                  {"diagnostics",
                                   {{"inputs", inputs},
                                    {"first_stage_validity", first_stage},
                                    {"mode", "postselected on both stages"}}}};
        std::ostringstream s;
        s << "demo-cp: " << evals << " postselected calls, " << correct << " correct, min success "
          << *std::min_element(per_call.begin(), per_call.end()) << ", final fidelity " << final_fidelity;
        output.emit("demo-cp", config(), seed, results, s.str());
    }
};

// ---------------------------------------------------------------------------
// verify

struct Verify {
    std::string suite = "all";
    uint64_t seed = 7;
    Output output;

    int run() const {
        std::vector<CriterionResult> results = run_suite(suite, seed);
        bool all = true;
        std::ostringstream lines;
        for (const auto &r : results) {
            all = all && r.passed;
            lines << (r.passed ? "PASS" : "FAIL") << " " << r.id << " " << r.name << ": " << r.summary << "\n";
        }
        nlohmann::json config = {{"suite", suite}, {"seed", seed}};
        RunManifest m{"verify", config, seed, artifact_version(), std::nullopt};
        if (output.timestamp) {
            m.timestamp = utc_timestamp_now();
        }
        std::string text = dump_report(make_report(m, suite_results(results)));
        if (output.out.empty()) {
            std::cout << text;
            std::cerr << lines.str();
        } else {
            write_text_file(output.out, text);
            std::cout << lines.str();
        }
        return all ? kExitOk : kExitAcceptance;
    }
};

// ---------------------------------------------------------------------------
// report

struct ReportCmd {
    std::string in;
    std::string csv;

    int run() const {
        nlohmann::json report;
        try {
            report = nlohmann::json::parse(read_text_file(in));
        } catch (const nlohmann::json::parse_error &e) {
            std::cerr << "error: '" << in << "' is not JSON: " << e.what() << "\n";
            return kExitConfig;
        }
        std::vector<std::string> problems = check_report(report);
        if (!problems.empty()) {
            for (const auto &p : problems) {
                std::cerr << "error: " << in << ": " << p << "\n";
            }
            return kExitConfig;
        }
        const auto &m = report["manifest"];
        const auto &r = report["results"];
        std::cout << m["subcommand"].get<std::string>() << " (seed " << m["seed"] << ", version "
                  << m["version"].get<std::string>() << "): " << r["wins"] << "/" << r["trials"] << ", rate "
                  << r["win_rate"] << ", ci95 " << r["ci95"].dump() << ", derived " << r["derived_expectation"].dump()
                  << "\n";
        if (!csv.empty()) {
            write_text_file(csv, per_trial_csv(report));
        }
        return kExitOk;
    }
};

void add_game_options(CLI::App *app, GameConfig &cfg) {
    app->add_option("--lambda", cfg.lambda, "Security parameter (even)")->capture_default_str();
    app->add_option("--domain", cfg.domain, "Size of the function domain")->capture_default_str();
    app->add_option("--data-bits", cfg.data_bits, "Output width of f")->capture_default_str();
    app->add_option("--gamma", cfg.gamma, "Goodness threshold")->capture_default_str();
    app->add_option("--trials", cfg.trials, "Independent trials")->capture_default_str();
    app->add_option("--seed", cfg.seed, "Master seed")->capture_default_str();
    app->add_option("--adversary", cfg.adversary, "Strategy name (default depends on the game)");
    app->add_option("--scheme", cfg.scheme, "Anti-piracy scheme: cp or toy")->capture_default_str();
    app->add_option("--measurement", cfg.measurement, "auto, exact or sampled")->capture_default_str();
    app->add_option("--eps", cfg.eps, "Sampled measurement precision")->capture_default_str();
    app->add_option("--delta", cfg.delta, "Sampled measurement failure rate")->capture_default_str();
    app->add_option("--queries", cfg.queries, "Adversary query budget (0: its default)")->capture_default_str();
    app->add_option("--nonnegligible", cfg.nonnegligible, "Win-rate level counted as non-negligible")
        ->capture_default_str();
}

}  // namespace

int main(int argc, char **argv) {
    qcp::tune_allocator();
    CLI::App app{"qcp-lab: copy-protection, copy-detection and quantum money simulations"};
    app.require_subcommand(1);

    DemoCp demo_cp;
    CLI::App *cp_cmd = app.add_subcommand("demo-cp", "Repeated evaluations of one copy-protected program");
    cp_cmd->add_option("--lambda", demo_cp.lambda, "Security parameter (even)")->capture_default_str();
    cp_cmd->add_option("--domain", demo_cp.domain, "Size of the function domain")->capture_default_str();
    cp_cmd->add_option("--data-bits", demo_cp.data_bits, "Output width of f")->capture_default_str();
    cp_cmd->add_option("--evals", demo_cp.evals, "Consecutive evaluations")->capture_default_str();
    cp_cmd->add_option("--seed", demo_cp.seed, "Master seed")->capture_default_str();
    cp_cmd->add_option("--transcript", demo_cp.transcript, "Write oracle query weights as CSV");
    demo_cp.output.add_to(cp_cmd);

    CdConfig cd_cfg;
    cd_cfg.per_trial = false;
    Output cd_out;
    CLI::App *cd_cmd = app.add_subcommand("demo-cd", "Copy-detection game against a named pirate");
    cd_cmd->add_option("--lambda", cd_cfg.lambda, "Banknote qubits (even)")->capture_default_str();
    cd_cmd->add_option("--q", cd_cfg.q, "Programs handed to the pirate")->capture_default_str();
    cd_cmd->add_option("--pirate", cd_cfg.pirate, "duplicate-everything, mark-eraser or honest-plus-dummy")
        ->capture_default_str();
    cd_cmd->add_option("--domain", cd_cfg.domain, "Size of the function domain")->capture_default_str();
    cd_cmd->add_option("--data-bits", cd_cfg.data_bits, "Output width of f")->capture_default_str();
    cd_cmd->add_option("--gamma", cd_cfg.gamma, "Goodness threshold")->capture_default_str();
    cd_cmd->add_option("--trials", cd_cfg.trials, "Independent trials")->capture_default_str();
    cd_cmd->add_option("--seed", cd_cfg.seed, "Master seed")->capture_default_str();
    cd_cmd->add_flag("--per-trial", cd_cfg.per_trial, "Keep one row per trial in the report");
    cd_out.add_to(cd_cmd);

    MoneyConfig money_cfg;
    money_cfg.per_trial = false;
    Output money_out;
    CLI::App *money_cmd = app.add_subcommand("demo-money", "Quantum money verification and counterfeiting");
    money_cmd->add_option("--lambda", money_cfg.lambda, "Banknote qubits (even)")->capture_default_str();
    money_cmd->add_option("--msg-space", money_cfg.msg_space, "Plaintext space (power of two)")
        ->capture_default_str();
    money_cmd->add_option("--rand-space", money_cfg.rand_space, "Encryption coins")->capture_default_str();
    money_cmd->add_option("--gamma", money_cfg.gamma, "Decryption threshold")->capture_default_str();
    money_cmd->add_option("--k", money_cfg.k, "Challenges of the sampled test")->capture_default_str();
    money_cmd->add_option("--measurement", money_cfg.measurement, "exact or sampled")->capture_default_str();
    money_cmd->add_option("--adversary", money_cfg.adversary, "honest or a copy-detection pirate")
        ->capture_default_str();
    money_cmd->add_option("--trials", money_cfg.trials, "Independent trials")->capture_default_str();
    money_cmd->add_option("--seed", money_cfg.seed, "Master seed")->capture_default_str();
    money_cmd->add_flag("--per-trial", money_cfg.per_trial, "Keep one row per trial in the report");
    money_out.add_to(money_cmd);

    GameConfig game_cfg;
    game_cfg.per_trial = false;
    std::string game_kind;
    Output game_out;
    CLI::App *game_cmd = app.add_subcommand("game", "Security games with named adversaries");
    game_cmd->add_option("kind", game_kind, "direct-product, learning or anti-piracy")
        ->required()
        ->check(CLI::IsMember({"direct-product", "learning", "anti-piracy"}));
    add_game_options(game_cmd, game_cfg);
    game_cmd->add_flag("--per-trial", game_cfg.per_trial, "Keep one row per trial in the report");
    game_out.add_to(game_cmd);

    Verify verify;
    CLI::App *verify_cmd = app.add_subcommand("verify", "Run the invariant suite");
    verify_cmd->add_option("--suite", verify.suite, "all, or comma-separated criterion names or ids")
        ->capture_default_str();
    verify_cmd->add_option("--seed", verify.seed, "Master seed")->capture_default_str();
    verify.output.add_to(verify_cmd);

    ReportCmd report_cmd;
    CLI::App *rep = app.add_subcommand("report", "Check a report file and summarize it");
    rep->add_option("--in", report_cmd.in, "Report JSON")->required();
    rep->add_option("--csv", report_cmd.csv, "Write the per-trial rows as CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        std::cerr << app.help();
        return kExitConfig;
    }

    try {
        if (cp_cmd->parsed()) {
            demo_cp.run();
        } else if (cd_cmd->parsed()) {
            GameReport r = run_copy_detection_game(cd_cfg, cd_pirate(cd_cfg.pirate));
            cd_out.emit("demo-cd", cd_cfg.to_json(), cd_cfg.seed, game_results(r), rate_summary(r));
        } else if (money_cmd->parsed()) {
            GameReport r = run_money_game(money_cfg);
            money_out.emit("demo-money", money_cfg.to_json(), money_cfg.seed, game_results(r), rate_summary(r));
        } else if (game_cmd->parsed()) {
            GameReport r;
            if (game_kind == "direct-product") {
                if (game_cfg.adversary.empty()) {
                    game_cfg.adversary = "measure-guess";
                }
                r = run_direct_product_game(game_cfg, dp_adversary(game_cfg.adversary));
            } else if (game_kind == "learning") {
                if (game_cfg.adversary.empty()) {
                    game_cfg.adversary = "table-copy";
                }
                r = run_learning_game(game_cfg, learning_adversary(game_cfg.adversary));
            } else {
                if (game_cfg.adversary.empty()) {
                    game_cfg.adversary = "measure-duplicate";
                }
                r = run_anti_piracy_game(game_cfg, pirate(game_cfg.adversary));
            }
            nlohmann::json config = game_cfg.to_json();
            config["game"] = game_kind;
            game_out.emit("game", config, game_cfg.seed, game_results(r), rate_summary(r));
        } else if (verify_cmd->parsed()) {
            return verify.run();
        } else if (rep->parsed()) {
            return report_cmd.run();
        }
    } catch (const std::invalid_argument &e) {
        // Covers DimensionError and unknown names.
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ResourceError &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
    return kExitOk;
}
