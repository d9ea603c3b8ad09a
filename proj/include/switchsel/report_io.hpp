#pragma once
#include <map>
#include <string>

#include "switchsel/harness.hpp"

namespace switchsel {

inline constexpr const char* kToolVersion = "1.0.0";

/// Run provenance echoed into every artifact. The body of a CSV (header plus
/// data rows) is byte-identical across reruns of the same config; the
/// manifest block (comment lines) is the only part that may differ, since it
/// carries wall-clock timestamps.
struct Manifest {
    std::string subcommand;
    std::string kind;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> config;
    std::string start_time;
    std::string end_time;
};

std::string now_iso8601();

std::string csv_string(const Manifest& man, const Report& report);
std::string json_string(const Manifest& man, const Report& report);

// Strip manifest comment lines; what determinism guarantees to be identical.
std::string csv_body(const std::string& csv);

// Write to <path>.tmp then rename, so partial outputs are never left behind.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

}  // namespace switchsel
