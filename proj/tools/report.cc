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

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>
#include <stdexcept>

#ifndef QCP_VERSION
#define QCP_VERSION "0.0.0"
#endif

namespace qcp {

nlohmann::json RunManifest::to_json() const {
    return {{"subcommand", subcommand},
            {"config", config},
            {"seed", seed},
            {"version", version},
            {"timestamp", timestamp ? nlohmann::json(*timestamp) : nlohmann::json(nullptr)}};
}

std::string artifact_version() {
    return QCP_VERSION;
}

std::string utc_timestamp_now() {
    std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

nlohmann::json game_results(const GameReport &report) {
    return report.to_json();
}

nlohmann::json empty_results() {
    return {{"wins", uint64_t{0}},
            {"trials", uint64_t{0}},
            {"win_rate", 0.0},
            {"ci95", {0.0, 1.0}},
            {"derived_expectation", nullptr},
            {"diagnostics", nlohmann::json::object()}};
}

nlohmann::json make_report(const RunManifest &manifest, const nlohmann::json &results) {
    return {{"manifest", manifest.to_json()}, {"results", results}};
}

std::string dump_report(const nlohmann::json &report) {
    return report.dump(2) + "\n";
}

void write_text_file(const std::string &path, const std::string &text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open '" + path + "' for writing");
    }
    out << text;
    out.flush();
    if (!out) {
        throw std::runtime_error("write to '" + path + "' failed");
    }
}

std::string read_text_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open '" + path + "' for reading");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> check_report(const nlohmann::json &report) {
    std::vector<std::string> problems;
    auto need = [&](const nlohmann::json &obj, const std::string &where, const std::string &key, auto pred,
                    const char *type) {
        if (!obj.contains(key)) {
            problems.push_back(where + "." + key + " is missing");
        } else if (!pred(obj.at(key))) {
            problems.push_back(where + "." + key + " must be " + type);
        }
    };
    auto is_obj = [](const nlohmann::json &j) { return j.is_object(); };
    auto is_uint = [](const nlohmann::json &j) { return j.is_number_unsigned(); };
    auto is_num = [](const nlohmann::json &j) { return j.is_number(); };
    auto is_str = [](const nlohmann::json &j) { return j.is_string(); };
    auto is_num_or_null = [](const nlohmann::json &j) { return j.is_number() || j.is_null(); };
    auto is_str_or_null = [](const nlohmann::json &j) { return j.is_string() || j.is_null(); };
    auto is_pair = [](const nlohmann::json &j) {
        return j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number();
    };

    if (!report.is_object()) {
        return {"report must be an object"};
    }
    need(report, "$", "manifest", is_obj, "an object");
    need(report, "$", "results", is_obj, "an object");
    if (!problems.empty()) {
        return problems;
    }
    const auto &m = report.at("manifest");
    need(m, "manifest", "subcommand", is_str, "a string");
    need(m, "manifest", "config", is_obj, "an object");
    need(m, "manifest", "seed", is_uint, "a non-negative integer");
    need(m, "manifest", "version", is_str, "a string");
    need(m, "manifest", "timestamp", is_str_or_null, "a string or null");
    const auto &r = report.at("results");
    need(r, "results", "wins", is_uint, "a non-negative integer");
    need(r, "results", "trials", is_uint, "a non-negative integer");
    need(r, "results", "win_rate", is_num, "a number");
    need(r, "results", "ci95", is_pair, "a pair of numbers");
    need(r, "results", "derived_expectation", is_num_or_null, "a number or null");
    need(r, "results", "diagnostics", is_obj, "an object");
    if (problems.empty() && r.at("wins").get<uint64_t>() > r.at("trials").get<uint64_t>()) {
        problems.push_back("results.wins exceeds results.trials");
    }
    return problems;
}

std::string per_trial_csv(const nlohmann::json &report) {
    std::ostringstream out;
    out << "trial,win,exact,detail\n";
    const auto &r = report.at("results");
    if (!r.contains("per_trial")) {
        return out.str();
    }
    for (const auto &row : r.at("per_trial")) {
        nlohmann::json rest = row;
        rest.erase("trial");
        rest.erase("win");
        rest.erase("exact");
        std::string detail = rest.dump();
        std::string quoted;
        for (char c : detail) {
            quoted += c;
            if (c == '"') {
                quoted += '"';
            }
        }
        out << row.value("trial", uint64_t{0}) << ',' << (row.value("win", false) ? 1 : 0) << ',';
        if (row.contains("exact")) {
            out << row.at("exact").dump();
        }
        out << ",\"" << quoted << "\"\n";
    }
    return out.str();
}

}  // namespace qcp
