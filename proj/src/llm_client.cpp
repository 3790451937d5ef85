#include "diagno/llm_client.hpp"

#include "diagno/errors.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cstdlib>

namespace diagno {

using nlohmann::json;

std::optional<HttpLlmConfig> llm_config_from_env() {
    const char* url = std::getenv("DIAGNO_LLM_URL");
    if (!url || !*url) {
        return std::nullopt;
    }
    HttpLlmConfig c;
    c.url = url;
    if (const char* key = std::getenv("DIAGNO_LLM_KEY")) {
        c.key = key;
    }
    return c;
}

std::string chat_request_body(const std::string& model, const std::string& prompt) {
    json body = {{"model", model},
                 {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
                 {"temperature", 0}};
    return body.dump();
}

std::string chat_response_content(const std::string& body) {
    try {
        const json j = json::parse(body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw LlmTransportError(std::string("malformed chat completion response: ") + e.what());
    }
}

HttpLlmClient::HttpLlmClient(HttpLlmConfig config) : config_(std::move(config)) {
    const auto scheme_end = config_.url.find("://");
    if (scheme_end == std::string::npos) {
        throw ValidationError("LLM endpoint must be an absolute URL: '" + config_.url + "'");
    }
    const auto path_start = config_.url.find('/', scheme_end + 3);
    origin_ = config_.url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : config_.url.substr(path_start);
}

std::string HttpLlmClient::complete(const std::string& prompt) const {
    httplib::Client client(origin_);
    client.set_connection_timeout(config_.timeout_seconds, 0);
    client.set_read_timeout(config_.timeout_seconds, 0);
    client.set_write_timeout(config_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!config_.key.empty()) {
        headers.emplace("Authorization", "Bearer " + config_.key);
    }
    auto res = client.Post(path_, headers, chat_request_body(config_.model, prompt), "application/json");
    if (!res) {
        throw LlmTransportError("LLM request failed: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw LlmTransportError("LLM endpoint returned HTTP " + std::to_string(res->status));
    }
    return chat_response_content(res->body);
}

} // namespace diagno
