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

// The invariant suite run by `qcp verify`: one deterministic check per
// acceptance criterion, each against an independent reference computation.

#ifndef QCP_TOOLS_SUITE_H
#define QCP_TOOLS_SUITE_H

#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

namespace qcp {

struct CriterionInfo {
    int id;
    std::string name;
    /// Wall-clock budget in seconds; 0 when the criterion has none.
    double budget_seconds;
};

/// Criteria 1 to 10, in id order.
const std::vector<CriterionInfo> &suite_criteria();

struct CriterionResult {
    int id = 0;
    std::string name;
    bool passed = false;
    /// One deterministic line for PASS/FAIL output.
    std::string summary;
    nlohmann::json metrics = nlohmann::json::object();
    /// Wall-clock time; never written to a report.
    double seconds = 0;
};

/// Runs "all" or a comma-separated list of criterion names or ids. Each
/// criterion draws from derive_seed(seed, id). Unknown names throw
/// std::invalid_argument.
std::vector<CriterionResult> run_suite(const std::string &suite, uint64_t seed);

/// Keeps large state buffers in the heap between trials instead of returning
/// them to the kernel after every free. A no-op outside glibc.
void tune_allocator();

/// Report "results" object: wins = criteria passed, trials = criteria run.
nlohmann::json suite_results(const std::vector<CriterionResult> &results);

}  // namespace qcp

#endif
