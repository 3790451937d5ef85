#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace diagno {

/// Failure to obtain a completion (network, HTTP status, malformed response).
class LlmTransportError : public std::runtime_error {
public:
    explicit LlmTransportError(const std::string& what) : std::runtime_error(what) {}
};

/// Chat-completion client. Implementations hold no shared mutable state, so calls may run concurrently.
class LlmClient {
public:
    virtual ~LlmClient() = default;
    /// Completion text for a single user message. Throws LlmTransportError on failure.
    virtual std::string complete(const std::string& prompt) const = 0;
};

struct HttpLlmConfig {
    /// Full chat-completions endpoint, e.g. https://host/v1/chat/completions.
    std::string url;
    std::string key;
    std::string model = "gpt-4o-mini";
    int timeout_seconds = 30;
};

/// Endpoint from DIAGNO_LLM_URL and DIAGNO_LLM_KEY; nullopt when the URL is unset or empty.
std::optional<HttpLlmConfig> llm_config_from_env();

/// Request body `{model, messages: [{role: "user", content}], temperature: 0}`.
std::string chat_request_body(const std::string& model, const std::string& prompt);
/// Extracts choices[0].message.content; throws LlmTransportError when absent.
std::string chat_response_content(const std::string& body);

class HttpLlmClient final : public LlmClient {
public:
    explicit HttpLlmClient(HttpLlmConfig config);
    std::string complete(const std::string& prompt) const override;

private:
    HttpLlmConfig config_;
    std::string origin_;
    std::string path_;
};

} // namespace diagno
