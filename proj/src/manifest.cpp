#include "diagno/manifest.hpp"

#include "diagno/errors.hpp"
#include "diagno/io.hpp"

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <memory>

namespace diagno {

using nlohmann::json;

std::string sha256_hex(std::string_view data) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
        throw std::runtime_error("SHA-256 computation failed");
    }
    std::string out;
    char hex[3];
    for (unsigned int k = 0; k < len; ++k) {
        std::snprintf(hex, sizeof hex, "%02x", digest[k]);
        out += hex;
    }
    return out;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_text_file(path)); }

std::string manifest_timestamp() {
    std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
        char* end = nullptr;
        const long long v = std::strtoll(epoch, &end, 10);
        if (end && *end == '\0' && end != epoch) {
            t = static_cast<std::time_t>(v);
        }
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string format_manifest(const RunManifest& m) {
    json j;
    j["command"] = m.command;
    j["config_hash"] = m.config_hash;
    j["seed"] = m.seed;
    j["inputs"] = m.inputs;
    j["tool_version"] = m.tool_version;
    j["timestamp"] = m.timestamp;
    j["outputs"] = m.outputs;
    j["status"] = m.status;
    if (!m.error.empty()) {
        j["error"] = m.error;
    }
    return j.dump(2) + "\n";
}

RunManifest parse_manifest(std::string_view text) {
    RunManifest m;
    try {
        const json j = json::parse(text);
        m.command = j.at("command").get<std::string>();
        m.config_hash = j.at("config_hash").get<std::string>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
        m.tool_version = j.at("tool_version").get<std::string>();
        m.timestamp = j.at("timestamp").get<std::string>();
        m.outputs = j.at("outputs").get<std::vector<std::string>>();
        m.status = j.at("status").get<std::string>();
        m.error = j.value("error", std::string());
    } catch (const json::exception& e) {
        throw ValidationError(std::string("manifest JSON: ") + e.what());
    }
    return m;
}

void write_manifest(const RunManifest& m, const std::filesystem::path& dir) {
    write_text_atomic(dir / "manifest.json", format_manifest(m));
}

} // namespace diagno
