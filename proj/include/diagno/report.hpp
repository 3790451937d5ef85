#pragma once

#include "diagno/llm_client.hpp"
#include "diagno/prompt.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace diagno {

enum class Generator { Llm, Offline };
std::string_view to_string(Generator g);

struct DiagnosticReport {
    Diagnosis decision = Diagnosis::NonAD;
    std::string rationale;
    std::vector<std::string> recommendations;
    Audience audience = Audience::Clinician;
    double source_probability = 0.0;
    Generator generator = Generator::Offline;
    /// Fallback notices and feature names without a plain-language mapping.
    std::vector<std::string> warnings;
};

/// Technical terms that must not appear in patient-facing text (matched case-insensitively).
const std::vector<std::string>& technical_blocklist();
/// First blocklisted term found in `text`, if any.
std::optional<std::string> find_blocklisted(std::string_view text);

/// Plain-language description of a feature name; nullopt when the lexicon has no entry.
std::optional<std::string> plain_language(std::string_view feature_name);

/// Deterministic report: decision by the 0.5 threshold, templated rationale, rule-table recommendations.
DiagnosticReport render_offline(const PromptInput& input);

/// Decision in the last `DECISION:` stanza; nullopt when absent or ambiguous.
std::optional<Diagnosis> parse_llm_decision(std::string_view completion);

/// Report built from a completion, or nullopt when it cannot be parsed into a valid report.
std::optional<DiagnosticReport> parse_llm_report(std::string_view completion, const PromptInput& input);

/**
 * With no client, returns render_offline. Otherwise prompts the client, retries once with a
 * stricter format reminder when the answer is unusable or the transport fails, and then falls
 * back to the offline report with a warning. Never throws on client failures.
 */
DiagnosticReport generate_report(const PromptInput& input, const LlmClient* client);

/// Invariant violations of a report against its input; empty when the report is valid.
std::vector<std::string> report_violations(const DiagnosticReport& report, const PromptInput& input);

std::string format_report_json(const DiagnosticReport& report);
DiagnosticReport parse_report_json(std::string_view text);
std::string format_report_markdown(const DiagnosticReport& report);

} // namespace diagno
