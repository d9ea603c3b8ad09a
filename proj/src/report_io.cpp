#include "switchsel/report_io.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace switchsel {

std::string now_iso8601() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[40];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                  tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
    return buf;
}

std::string csv_string(const Manifest& man, const Report& report) {
    std::ostringstream out;
    out << "# switchsel " << kToolVersion << " report\n";
    out << "# subcommand: " << man.subcommand << "\n";
    out << "# kind: " << man.kind << "\n";
    out << "# start: " << man.start_time << "\n";
    out << "# end: " << man.end_time << "\n";
    for (const auto& [k, v] : man.config) out << "# config." << k << ": " << v << "\n";
    for (std::size_t i = 0; i < report.columns.size(); ++i)
        out << (i ? "," : "") << report.columns[i];
    out << "\n";
    for (const auto& row : report.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
        out << "\n";
    }
    return out.str();
}

std::string json_string(const Manifest& man, const Report& report) {
    nlohmann::json j;
    j["manifest"] = {{"tool", "switchsel"},
                     {"version", kToolVersion},
                     {"subcommand", man.subcommand},
                     {"kind", man.kind},
                     {"seed", man.seed},
                     {"start", man.start_time},
                     {"end", man.end_time},
                     {"config", man.config}};
    j["columns"] = report.columns;
    j["rows"] = report.rows;
    if (!report.summary.empty()) j["summary"] = report.summary;
    return j.dump(2) + "\n";
}

std::string csv_body(const std::string& csv) {
    std::istringstream in(csv);
    std::ostringstream out;
    std::string line;
    while (std::getline(in, line))
        if (line.empty() || line[0] != '#') out << line << "\n";
    return out.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw Error("cannot open " + tmp + " for writing");
        f << content;
        f.flush();
        if (!f) throw Error("write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot read " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace switchsel
