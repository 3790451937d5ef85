#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace diagno {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

struct RunManifest {
    std::string command;
    std::string config_hash;
    std::uint64_t seed = 0;
    /// Input path (as given) to its SHA-256.
    std::map<std::string, std::string> inputs;
    std::string tool_version{kToolVersion};
    std::string timestamp;
    /// Output paths relative to the output directory.
    std::vector<std::string> outputs;
    /// "running", "ok" or "failed".
    std::string status = "running";
    std::string error;
};

/// UTC ISO-8601 time; SOURCE_DATE_EPOCH takes precedence over the clock when set.
std::string manifest_timestamp();

std::string format_manifest(const RunManifest& m);
RunManifest parse_manifest(std::string_view text);
void write_manifest(const RunManifest& m, const std::filesystem::path& dir);

} // namespace diagno
