#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace lmroute {

inline constexpr const char* kArtifactVersion = "0.1.0";

// Provenance block embedded in every emitted report: the command, its fully
// resolved configuration, the seed, and digests of the input files.
struct RunManifest {
    std::string command;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    std::uint64_t seed = 0;
    std::string version = kArtifactVersion;
    std::map<std::string, std::string> input_digests;  // path -> hex digest

    nlohmann::ordered_json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);
};

// FNV-1a 64 over the file's bytes, as 16 hex characters.
std::string file_digest_hex(const std::string& path);

// Line-delimited records followed by a single summary object that embeds the
// manifest; streams of sweep points concatenate cleanly.
void write_report(std::ostream& out, const std::vector<nlohmann::ordered_json>& lines,
                  nlohmann::ordered_json summary, const RunManifest& manifest);
void write_report_file(const std::string& path, const std::vector<nlohmann::ordered_json>& lines,
                       nlohmann::ordered_json summary, const RunManifest& manifest);

struct ParsedReport {
    std::vector<nlohmann::json> lines;
    nlohmann::json summary;
    RunManifest manifest;
};
ParsedReport parse_report_file(const std::string& path);

}  // namespace lmroute
