#include "lmroute/report.hpp"

#include <fstream>
#include <sstream>

#include "lmroute/errors.hpp"

namespace lmroute {

using ordered_json = nlohmann::ordered_json;

ordered_json RunManifest::to_json() const {
    ordered_json j;
    j["command"] = command;
    j["config"] = config;
    j["seed"] = seed;
    j["version"] = version;
    j["input_digests"] = input_digests;
    return j;
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.config = j.at("config");
    m.seed = j.at("seed").get<std::uint64_t>();
    m.version = j.at("version").get<std::string>();
    m.input_digests = j.at("input_digests").get<std::map<std::string, std::string>>();
    return m;
}

std::string file_digest_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open file for digest: " + path);
    std::uint64_t h = 14695981039346656037ULL;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
        if (!in) break;
    }
    std::ostringstream out;
    out << std::hex;
    for (int shift = 60; shift >= 0; shift -= 4) out << ((h >> shift) & 0xF);
    return out.str();
}

void write_report(std::ostream& out, const std::vector<ordered_json>& lines,
                  ordered_json summary, const RunManifest& manifest) {
    for (const auto& line : lines) out << line.dump() << "\n";
    ordered_json tail;
    tail["summary"] = std::move(summary);
    tail["manifest"] = manifest.to_json();
    out << tail.dump() << "\n";
}

void write_report_file(const std::string& path, const std::vector<ordered_json>& lines,
                       ordered_json summary, const RunManifest& manifest) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write report file: " + path);
    write_report(out, lines, std::move(summary), manifest);
}

ParsedReport parse_report_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open report file: " + path);
    ParsedReport report;
    std::string line;
    std::string last;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (!last.empty()) {
            nlohmann::json rec = nlohmann::json::parse(last, nullptr, false);
            if (rec.is_discarded()) throw ParseError("report line is not valid JSON: " + path);
            report.lines.push_back(std::move(rec));
        }
        last = line;
    }
    if (last.empty()) throw ParseError("report is empty: " + path);
    nlohmann::json tail = nlohmann::json::parse(last, nullptr, false);
    if (tail.is_discarded() || !tail.contains("summary") || !tail.contains("manifest"))
        throw ParseError("report has no summary/manifest tail: " + path);
    report.summary = tail["summary"];
    report.manifest = RunManifest::from_json(tail["manifest"]);
    return report;
}

}  // namespace lmroute
