#include "diagno/prompt.hpp"

#include "diagno/errors.hpp"
#include "diagno/numeric_format.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

namespace diagno {

using nlohmann::json;

std::string_view to_string(Diagnosis d) { return d == Diagnosis::AD ? "AD" : "nonAD"; }

std::string_view to_string(Audience a) { return a == Audience::Clinician ? "clinician" : "patient"; }

std::string_view to_string(Strategy s) {
    switch (s) {
    case Strategy::Direct:
        return "direct";
    case Strategy::StepByStep:
        return "step";
    case Strategy::StepByStepDomain:
        return "step-domain";
    }
    return "direct";
}

Diagnosis parse_diagnosis(std::string_view text) {
    if (text == "AD") {
        return Diagnosis::AD;
    }
    if (text == "nonAD") {
        return Diagnosis::NonAD;
    }
    throw ValidationError("diagnosis must be AD or nonAD, got '" + std::string(text) + "'");
}

Audience parse_audience(std::string_view text) {
    if (text == "clinician") {
        return Audience::Clinician;
    }
    if (text == "patient") {
        return Audience::Patient;
    }
    throw ValidationError("audience must be clinician or patient, got '" + std::string(text) + "'");
}

Strategy parse_strategy(std::string_view text) {
    if (text == "direct") {
        return Strategy::Direct;
    }
    if (text == "step") {
        return Strategy::StepByStep;
    }
    if (text == "step-domain") {
        return Strategy::StepByStepDomain;
    }
    throw ValidationError("strategy must be direct, step or step-domain, got '" + std::string(text) + "'");
}

Diagnosis decide(double probability) { return probability >= 0.5 ? Diagnosis::AD : Diagnosis::NonAD; }

void PromptInput::validate() const {
    if (!(probability >= 0.0 && probability <= 1.0)) {
        throw ValidationError("probability must lie in [0, 1]");
    }
    if (predicted != decide(probability)) {
        throw ValidationError("predicted label disagrees with the 0.5 probability threshold");
    }
    if (top_features.empty()) {
        throw ValidationError("prompt input needs at least one top feature");
    }
    for (const auto& f : top_features) {
        if (f.name.empty()) {
            throw ValidationError("top feature with empty name");
        }
        if (!std::isfinite(f.value) || !std::isfinite(f.attribution)) {
            throw ValidationError("top feature '" + f.name + "' has a non-finite value or attribution");
        }
        if (f.range && !(f.range->low < f.range->high)) {
            throw ValidationError("reference range for '" + f.name + "' must have low < high");
        }
    }
    for (const auto& [name, s] : population_stats) {
        if (!std::isfinite(s.mean_ad) || !std::isfinite(s.mean_non_ad) || !(s.sd >= 0.0)) {
            throw ValidationError("invalid population statistics for '" + name + "'");
        }
    }
}

namespace {

std::string signed_short(double v) { return (v >= 0.0 ? "+" : "") + format_short(v); }

std::string feature_line(const TopFeature& f) {
    std::string line = "- " + f.name + " = " + format_short(f.value) + " (attribution " + signed_short(f.attribution) + ")";
    if (f.range) {
        line += " [reference range " + format_short(f.range->low) + " to " + format_short(f.range->high);
        if (!f.range->unit.empty()) {
            line += " " + f.range->unit;
        }
        line += "]";
    }
    return line + "\n";
}

std::string header(const PromptInput& in) {
    std::string out = "You are assisting with an Alzheimer's disease (AD) diagnostic assessment.\n";
    out += "A neural classifier trained on cell-type-specific expression, eQTL summary statistics and clinical covariates ";
    out += "predicts " + std::string(to_string(in.predicted)) + " with p(AD) = " + format_short(in.probability) + ".\n";
    out += "Feature attributions are Integrated Gradients on the classifier logit; positive values push toward AD.\n";
    return out;
}

std::string audience_instruction(Audience a) {
    if (a == Audience::Clinician) {
        return "Write for a clinician: use precise biomarker terminology, cite attribution magnitudes and frame the "
               "differential risk.\n";
    }
    return "Write for the patient: use plain language without technical jargon and give an actionable summary.\n";
}

std::string answer_instruction() {
    return "Answer with these sections:\n"
           "RATIONALE: a short rationale that names the features driving the decision.\n"
           "RECOMMENDATIONS: one next step per line, each starting with '- '.\n"
           "DECISION: <AD|nonAD>\n";
}

const PopulationStat& stat_for(const PromptInput& in, const std::string& name) {
    auto it = in.population_stats.find(name);
    if (it == in.population_stats.end()) {
        throw ValidationError("missing population statistics for feature '" + name + "'");
    }
    return it->second;
}

} // namespace

std::string population_section(const PromptInput& in) {
    std::string out = "Step 1. Population summary (AD mean, nonAD mean, standard deviation per feature):\n";
    for (const auto& f : in.top_features) {
        const auto& s = stat_for(in, f.name);
        out += "  " + f.name + ": AD mean " + format_short(s.mean_ad) + ", nonAD mean " + format_short(s.mean_non_ad) +
               ", sd " + format_short(s.sd) + "\n";
    }
    return out;
}

std::string build_prompt(const PromptInput& in) {
    in.validate();
    std::string out = header(in);
    if (in.strategy == Strategy::Direct) {
        out += "\nTop features:\n";
        for (const auto& f : in.top_features) {
            out += feature_line(f);
        }
        out += "\nDecide whether this patient has AD.\n";
        out += audience_instruction(in.audience);
        out += answer_instruction();
        return out;
    }
    if (in.population_stats.empty()) {
        throw ValidationError("step-by-step prompts need population statistics");
    }
    if (in.strategy == Strategy::StepByStepDomain && in.domain_knowledge.empty()) {
        throw ValidationError("the domain-knowledge strategy needs at least one knowledge snippet");
    }
    out += "\nReason step by step.\n\n";
    out += population_section(in);
    if (in.strategy == Strategy::StepByStepDomain) {
        out += "\nDomain knowledge:\n";
        for (const auto& [key, snippet] : in.domain_knowledge) {
            out += "  " + key + ": " + snippet + "\n";
        }
    }
    out += "\nStep 2. Compare this case with the population:\n";
    for (const auto& f : in.top_features) {
        const auto& s = stat_for(in, f.name);
        const bool nearer_ad = std::abs(f.value - s.mean_ad) <= std::abs(f.value - s.mean_non_ad);
        out += "  " + f.name + " = " + format_short(f.value) + " (attribution " + signed_short(f.attribution) +
               "), nearer the " + (nearer_ad ? "AD" : "nonAD") + " mean";
        if (f.range) {
            out += "; reference range " + format_short(f.range->low) + " to " + format_short(f.range->high);
            if (!f.range->unit.empty()) {
                out += " " + f.range->unit;
            }
        }
        out += "\n";
    }
    out += "\nStep 3. Decide whether this patient has AD.\n";
    out += audience_instruction(in.audience);
    out += answer_instruction();
    return out;
}

std::vector<std::pair<std::string, std::string>> parse_knowledge(std::string_view text) {
    std::vector<std::pair<std::string, std::string>> out;
    try {
        const json j = json::parse(text);
        if (!j.is_object()) {
            throw ValidationError("knowledge file must be a JSON object of strings");
        }
        for (const auto& [key, value] : j.items()) {
            out.emplace_back(key, value.get<std::string>());
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("knowledge JSON: ") + e.what());
    }
    return out;
}

std::map<std::string, ReferenceRange> parse_reference_ranges(std::string_view text) {
    std::map<std::string, ReferenceRange> out;
    try {
        const json j = json::parse(text);
        for (const auto& [key, value] : j.items()) {
            ReferenceRange r{value.at("low").get<double>(), value.at("high").get<double>(),
                             value.value("unit", std::string())};
            if (!(r.low < r.high)) {
                throw ValidationError("reference range for '" + key + "' must have low < high");
            }
            out.emplace(key, r);
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("reference range JSON: ") + e.what());
    }
    return out;
}

} // namespace diagno
