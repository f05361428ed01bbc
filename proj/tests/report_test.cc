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

#include "report.h"

#include <gtest/gtest.h>

#include <filesystem>

#include "suite.h"

using namespace qcp;

namespace {

RunManifest manifest() {
    RunManifest m;
    m.subcommand = "game";
    m.config = {{"lambda", 4}, {"trials", 3}};
    m.seed = 11;
    m.version = artifact_version();
    return m;
}

GameReport small_report() {
    GameReport g;
    g.game = "direct-product";
    g.adversary = "measure-guess";
    g.add(TrialResult{true, 0.25, {{"guess", 1}}}, true);
    g.add(TrialResult{false, 0.25, {{"guess", 2}}}, true);
    g.add(TrialResult{true, 0.25, {{"guess", 3}}}, true);
    g.derived_expectation = 9.0 / 64;
    return g;
}

}  // namespace

TEST(report, round_trip_is_byte_stable) {
    std::string text = dump_report(make_report(manifest(), game_results(small_report())));
    nlohmann::json back = nlohmann::json::parse(text);
    EXPECT_EQ(dump_report(back), text);
    EXPECT_TRUE(check_report(back).empty());
    EXPECT_EQ(back["results"]["wins"], 2);
    EXPECT_EQ(back["results"]["trials"], 3);
    EXPECT_TRUE(back["manifest"]["timestamp"].is_null());
}

TEST(report, empty_results_are_well_formed) {
    nlohmann::json r = make_report(manifest(), empty_results());
    EXPECT_TRUE(check_report(r).empty());
    EXPECT_EQ(r["results"]["trials"], 0);
    EXPECT_TRUE(r["results"]["derived_expectation"].is_null());
}

TEST(report, timestamp_only_when_requested) {
    RunManifest m = manifest();
    m.timestamp = utc_timestamp_now();
    nlohmann::json j = m.to_json();
    ASSERT_TRUE(j["timestamp"].is_string());
    EXPECT_EQ(j["timestamp"].get<std::string>().back(), 'Z');
}

TEST(report, check_flags_missing_fields) {
    nlohmann::json r = make_report(manifest(), empty_results());
    r["results"].erase("wins");
    r["manifest"].erase("seed");
    EXPECT_GE(check_report(r).size(), 2u);
    EXPECT_FALSE(check_report(nlohmann::json::array()).empty());
}

TEST(report, per_trial_csv_quotes_detail) {
    nlohmann::json r = make_report(manifest(), game_results(small_report()));
    std::string csv = per_trial_csv(r);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "trial,win,exact,detail");
    EXPECT_NE(csv.find("0,1,0.25,\"{\"\"guess\"\":1}\""), std::string::npos);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}

TEST(report, file_helpers_round_trip_and_name_the_path) {
    auto path = (std::filesystem::temp_directory_path() / "qcp_report_test.json").string();
    write_text_file(path, "abc\n");
    EXPECT_EQ(read_text_file(path), "abc\n");
    std::filesystem::remove(path);
    try {
        read_text_file(path);
        FAIL() << "expected a throw";
    } catch (const std::exception &e) {
        EXPECT_NE(std::string(e.what()).find(path), std::string::npos);
    }
}

TEST(report, suite_rejects_unknown_criterion) {
    EXPECT_THROW(run_suite("no-such-criterion", 1), std::invalid_argument);
}

TEST(report, suite_results_count_passes) {
    std::vector<CriterionResult> rs(2);
    rs[0].id = 1;
    rs[0].name = "a";
    rs[0].passed = true;
    rs[1].id = 2;
    rs[1].name = "b";
    nlohmann::json j = suite_results(rs);
    EXPECT_EQ(j["wins"], 1);
    EXPECT_EQ(j["trials"], 2);
    nlohmann::json report = make_report(manifest(), j);
    EXPECT_TRUE(check_report(report).empty());
}
