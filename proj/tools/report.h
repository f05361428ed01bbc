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

#ifndef QCP_TOOLS_REPORT_H
#define QCP_TOOLS_REPORT_H

#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "qcp/games.h"

namespace qcp {

/// Everything needed to reproduce a run. Worker counts are deliberately absent.
struct RunManifest {
    std::string subcommand;
    nlohmann::json config = nlohmann::json::object();
    uint64_t seed = 0;
    std::string version;
    /// ISO-8601 UTC; only filled when asked for, since it breaks byte equality.
    std::optional<std::string> timestamp;

    nlohmann::json to_json() const;
};

std::string artifact_version();
std::string utc_timestamp_now();

/// The "results" object for a finished game.
nlohmann::json game_results(const GameReport &report);

/// Results with no trials: zero wins, null rate and expectation.
nlohmann::json empty_results();

/// {"manifest": ..., "results": ...}.
nlohmann::json make_report(const RunManifest &manifest, const nlohmann::json &results);

/// Serialized form used for every report file: 2-space indent, trailing newline.
std::string dump_report(const nlohmann::json &report);

/// Writes `text` to `path`; throws std::runtime_error naming the path on failure.
void write_text_file(const std::string &path, const std::string &text);
std::string read_text_file(const std::string &path);

/// Structural check of a report against the bundled schema's required
/// fields and types. Returns the list of problems (empty when valid).
std::vector<std::string> check_report(const nlohmann::json &report);

/// CSV of a report's per-trial rows: trial, win, exact, detail (JSON).
std::string per_trial_csv(const nlohmann::json &report);

}  // namespace qcp

#endif
