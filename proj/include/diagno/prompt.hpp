#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace diagno {

enum class Diagnosis { NonAD, AD };
enum class Audience { Clinician, Patient };
enum class Strategy { Direct, StepByStep, StepByStepDomain };

std::string_view to_string(Diagnosis d);
std::string_view to_string(Audience a);
/// CLI spelling: direct, step, step-domain.
std::string_view to_string(Strategy s);
Diagnosis parse_diagnosis(std::string_view text);
Audience parse_audience(std::string_view text);
Strategy parse_strategy(std::string_view text);

/// AD iff probability >= 0.5.
Diagnosis decide(double probability);

struct ReferenceRange {
    double low = 0.0;
    double high = 0.0;
    std::string unit;
};

struct TopFeature {
    std::string name;
    double value = 0.0;
    double attribution = 0.0;
    std::optional<ReferenceRange> range;
};

struct PopulationStat {
    double mean_ad = 0.0;
    double mean_non_ad = 0.0;
    double sd = 0.0;
};

struct PromptInput {
    Diagnosis predicted = Diagnosis::NonAD;
    double probability = 0.0;
    std::vector<TopFeature> top_features;
    /// (key, snippet) pairs in presentation order.
    std::vector<std::pair<std::string, std::string>> domain_knowledge;
    Audience audience = Audience::Clinician;
    Strategy strategy = Strategy::Direct;
    std::map<std::string, PopulationStat> population_stats;

    /// Probability in [0, 1], consistent predicted label, non-empty features, finite values, low < high.
    void validate() const;
};

/**
 * Prompt text for the input's strategy. Step-by-step strategies need population statistics
 * for every top feature; the domain variant also needs at least one knowledge snippet.
 * Every prompt ends with the answer stanza instruction `DECISION: <AD|nonAD>`.
 */
std::string build_prompt(const PromptInput& input);

/// The population summary block shared by both step-by-step templates.
std::string population_section(const PromptInput& input);

/// Knowledge file JSON `{key: snippet}`; entries come back sorted by key.
std::vector<std::pair<std::string, std::string>> parse_knowledge(std::string_view text);

/// Reference range JSON `{feature: {low, high, unit}}`.
std::map<std::string, ReferenceRange> parse_reference_ranges(std::string_view text);

} // namespace diagno
