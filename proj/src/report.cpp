#include "diagno/report.hpp"

#include "diagno/errors.hpp"
#include "diagno/features.hpp"
#include "diagno/numeric_format.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>

namespace diagno {

using nlohmann::json;

std::string_view to_string(Generator g) { return g == Generator::Llm ? "llm" : "offline"; }

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool contains_ci(std::string_view haystack, std::string_view needle) {
    return lower(haystack).find(lower(needle)) != std::string::npos;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

/// Gene and cell type of a tagged feature name; empty when not applicable.
std::pair<std::string, std::string> split_feature(std::string_view name) {
    const auto first = name.find(':');
    if (first == std::string_view::npos) {
        return {};
    }
    const auto rest = name.substr(first + 1);
    const auto second = rest.find(':');
    if (second == std::string_view::npos) {
        return {std::string(rest), {}};
    }
    return {std::string(rest.substr(0, second)), std::string(rest.substr(second + 1))};
}

struct Stem {
    const char* stem;
    bool exact;
    const char* phrase;
};

const Stem kCovariateLexicon[] = {
    {"age", true, "age"},
    {"sex", true, "sex"},
    {"batch", true, "lab processing batch"},
    {"bmi", true, "body weight relative to height"},
    {"ldl", false, "bad cholesterol level"},
    {"hdl", false, "good cholesterol level"},
    {"cholesterol", false, "cholesterol level"},
    {"triglycer", false, "blood fat level"},
    {"homocysteine", false, "a blood marker linked to B vitamins"},
    {"creatinine", false, "a kidney function marker"},
    {"egfr", false, "how well the kidneys filter blood"},
    {"b12", false, "vitamin B12 level"},
    {"folate", false, "folate (a B vitamin) level"},
    {"sleep", false, "sleep"},
    {"apoe", false, "an inherited risk gene (APOE)"},
    {"mmse", false, "memory test score"},
    {"education", false, "years of education"},
    {"pressure", false, "blood pressure"},
};

const std::vector<std::string> kLipidStems{"ldl", "hdl", "cholesterol", "triglycer", "lipid", "apoe", "clu", "abca7"};
const std::vector<std::string> kRenalStems{"creatinine", "egfr", "kidney", "renal", "cystatin"};
const std::vector<std::string> kSleepStems{"sleep"};
const std::vector<std::string> kVitaminStems{"homocysteine", "b12", "folate"};

bool any_stem(const std::string& lowered, const std::vector<std::string>& stems) {
    return std::any_of(stems.begin(), stems.end(), [&](const std::string& s) { return lowered.find(s) != std::string::npos; });
}

std::string direction(double attribution) {
    if (attribution > 0.0) {
        return "toward AD";
    }
    if (attribution < 0.0) {
        return "toward nonAD";
    }
    return "neutral";
}

std::string range_note(const TopFeature& f) {
    if (!f.range) {
        return {};
    }
    const char* where = f.value < f.range->low ? "below" : f.value > f.range->high ? "above" : "within";
    std::string out = std::string("; ") + where + " reference range " + format_short(f.range->low) + " to " +
                      format_short(f.range->high);
    if (!f.range->unit.empty()) {
        out += " " + f.range->unit;
    }
    return out;
}

std::string signed_short(double v) { return (v >= 0.0 ? "+" : "") + format_short(v); }

std::string clinician_rationale(const PromptInput& in, Diagnosis d) {
    std::string out = "p(AD) = " + format_short(in.probability) + " against a decision threshold of 0.5 (decision " +
                      std::string(to_string(d)) + ", margin " + signed_short(in.probability - 0.5) + "). ";
    out += "Leading Integrated Gradients attributions on the classifier logit: ";
    double net = 0.0;
    for (std::size_t k = 0; k < in.top_features.size(); ++k) {
        const auto& f = in.top_features[k];
        net += f.attribution;
        out += (k ? "; " : "") + f.name + " = " + format_short(f.value) + " (attribution " + signed_short(f.attribution) +
               ", " + direction(f.attribution) + range_note(f) + ")";
    }
    out += ". Net attribution of these features " + signed_short(net) + ", " + direction(net) + ".";
    for (const auto& [key, snippet] : in.domain_knowledge) {
        const bool relevant = std::any_of(in.top_features.begin(), in.top_features.end(),
                                          [&](const TopFeature& f) { return contains_ci(f.name, key); });
        if (relevant) {
            out += " Prior knowledge on " + key + ": " + snippet;
        }
    }
    return out;
}

std::string patient_rationale(const PromptInput& in, Diagnosis d, std::vector<std::string>& warnings) {
    const auto percent = static_cast<int>(std::lround(100.0 * in.probability));
    std::string out = "Our model estimates a " + std::to_string(percent) + "% chance of Alzheimer's disease (AD), so the result " +
                      (d == Diagnosis::AD ? "suggests AD." : "does not suggest AD.");
    out += " The main factors were:";
    for (std::size_t k = 0; k < in.top_features.size(); ++k) {
        const auto& f = in.top_features[k];
        const bool name_clean = !find_blocklisted(f.name);
        auto phrase = plain_language(f.name);
        if (!phrase) {
            warnings.push_back("no plain-language wording for feature '" + f.name + "'");
            phrase = name_clean ? f.name : "one of the measured markers";
        }
        if (find_blocklisted(*phrase)) {
            phrase = "one of the measured markers";
        }
        out += (k ? ";" : "") + std::string(" ") + *phrase;
        if (name_clean && *phrase != f.name) {
            out += " (" + f.name + ")";
        }
        if (f.attribution > 0.0) {
            out += ", which raised the estimate";
        } else if (f.attribution < 0.0) {
            out += ", which lowered the estimate";
        } else {
            out += ", which made no difference";
        }
        if (f.range) {
            out += f.value < f.range->low ? " and is below the usual range"
                   : f.value > f.range->high ? " and is above the usual range"
                                             : " and is within the usual range";
        }
    }
    out += ".";
    return out;
}

std::vector<std::string> recommendations(const PromptInput& in, Diagnosis d) {
    const bool clinician = in.audience == Audience::Clinician;
    std::vector<std::string> out;
    if (d == Diagnosis::AD) {
        out.push_back(clinician ? "Refer for neuroimaging (MRI, amyloid PET) and formal cognitive assessment to confirm AD."
                                : "Ask your doctor about a brain scan and memory tests to confirm the result.");
    } else {
        out.push_back(clinician ? "Routine monitoring: repeat cognitive screening in 12 months, sooner if symptoms progress."
                                : "Keep up regular check-ups so your doctor can keep monitoring your memory, and keep a "
                                  "healthy lifestyle.");
    }
    bool lipid = false, renal = false, sleep = false, vitamin = false, genetic = false;
    for (const auto& f : in.top_features) {
        const auto l = lower(f.name);
        lipid = lipid || any_stem(l, kLipidStems);
        renal = renal || any_stem(l, kRenalStems);
        sleep = sleep || any_stem(l, kSleepStems);
        vitamin = vitamin || any_stem(l, kVitaminStems);
        const auto tag = tag_of(f.name);
        genetic = genetic || tag == FeatureTag::EqtlBeta || tag == FeatureTag::EqtlSe || tag == FeatureTag::EqtlPval ||
                  l.find("apoe") != std::string::npos;
    }
    if (lipid) {
        out.push_back(clinician ? "Order a fasting lipid panel and review lipid management."
                                : "Talk with your doctor about lipid management, such as diet, exercise or cholesterol medicine.");
    }
    if (renal) {
        out.push_back(clinician ? "Check renal function (creatinine, eGFR) before further workup."
                                : "Ask for a kidney function check.");
    }
    if (sleep) {
        out.push_back(clinician ? "Assess sleep quality and screen for sleep apnoea." : "Talk with your doctor about your sleep.");
    }
    if (vitamin) {
        out.push_back(clinician ? "Measure B12, folate and homocysteine and correct deficiencies."
                                : "Ask for a vitamin B blood test.");
    }
    if (genetic) {
        out.push_back(clinician ? "Consider genetic counselling and review the eQTL evidence for the implicated genes."
                                : "Consider genetic counselling to talk about inherited risk.");
    }
    return out;
}

} // namespace

const std::vector<std::string>& technical_blocklist() {
    static const std::vector<std::string> terms{"eQTL",  "logit", "attribution",    "Integrated Gradients",
                                                "sigmoid", "BETA", "PVAL",          "p-value",
                                                "standard error", "z-score", "LDL", "homocysteine"};
    return terms;
}

std::optional<std::string> find_blocklisted(std::string_view text) {
    const auto l = lower(text);
    for (const auto& term : technical_blocklist()) {
        if (l.find(lower(term)) != std::string::npos) {
            return term;
        }
    }
    return std::nullopt;
}

std::optional<std::string> plain_language(std::string_view name) {
    const auto [gene, cell_type] = split_feature(name);
    switch (tag_of(name)) {
    case FeatureTag::Cts:
        if (gene.empty() || cell_type.empty()) {
            return std::nullopt;
        }
        return "activity of the " + gene + " gene in " + cell_type + " cells";
    case FeatureTag::EqtlBeta:
        return "an inherited effect on the " + gene + " gene";
    case FeatureTag::EqtlSe:
        return "how precisely the inherited effect on the " + gene + " gene is known";
    case FeatureTag::EqtlPval:
        return "how reliable the inherited link to the " + gene + " gene is";
    case FeatureTag::Covariate:
        break;
    }
    const auto l = lower(name);
    for (const auto& s : kCovariateLexicon) {
        if (s.exact ? l == s.stem : l.find(s.stem) != std::string::npos) {
            return std::string(s.phrase);
        }
    }
    return std::nullopt;
}

DiagnosticReport render_offline(const PromptInput& input) {
    input.validate();
    DiagnosticReport r;
    r.decision = decide(input.probability);
    r.audience = input.audience;
    r.source_probability = input.probability;
    r.generator = Generator::Offline;
    r.rationale = input.audience == Audience::Clinician ? clinician_rationale(input, r.decision)
                                                        : patient_rationale(input, r.decision, r.warnings);
    r.recommendations = recommendations(input, r.decision);
    return r;
}

std::optional<Diagnosis> parse_llm_decision(std::string_view completion) {
    const auto l = lower(completion);
    const auto pos = l.rfind("decision:");
    if (pos == std::string::npos) {
        return std::nullopt;
    }
    const auto start = pos + std::string_view("decision:").size();
    const auto end = l.find('\n', start);
    std::string token = l.substr(start, end == std::string::npos ? std::string::npos : end - start);
    const std::string strip = " \t\r*`<>\"'.[]()";
    const auto b = token.find_first_not_of(strip);
    if (b == std::string::npos) {
        return std::nullopt;
    }
    token = token.substr(b, token.find_last_not_of(strip) - b + 1);
    if (token == "ad" || token == "yes") {
        return Diagnosis::AD;
    }
    if (token == "nonad" || token == "non-ad" || token == "non ad" || token == "no") {
        return Diagnosis::NonAD;
    }
    return std::nullopt;
}

std::optional<DiagnosticReport> parse_llm_report(std::string_view completion, const PromptInput& input) {
    const auto decision = parse_llm_decision(completion);
    if (!decision) {
        return std::nullopt;
    }
    const auto l = lower(completion);
    const auto decision_pos = l.rfind("decision:");
    const auto rat = l.find("rationale:");
    const auto rec = l.find("recommendations:");
    std::size_t rat_begin = rat == std::string::npos ? 0 : rat + std::string_view("rationale:").size();
    std::size_t rat_end = rec != std::string::npos && rec > rat_begin ? rec : decision_pos;
    if (rat_end < rat_begin) {
        return std::nullopt;
    }
    DiagnosticReport r;
    r.decision = *decision;
    r.audience = input.audience;
    r.source_probability = input.probability;
    r.generator = Generator::Llm;
    r.rationale = trim(completion.substr(rat_begin, rat_end - rat_begin));
    if (rec != std::string::npos && rec < decision_pos) {
        const auto body = completion.substr(rec + std::string_view("recommendations:").size(),
                                            decision_pos - rec - std::string_view("recommendations:").size());
        std::size_t at = 0;
        while (at <= body.size()) {
            const auto nl = body.find('\n', at);
            auto line = trim(body.substr(at, nl == std::string_view::npos ? std::string_view::npos : nl - at));
            if (!line.empty() && (line[0] == '-' || line[0] == '*')) {
                line = trim(std::string_view(line).substr(1));
                if (!line.empty()) {
                    r.recommendations.push_back(line);
                }
            }
            if (nl == std::string_view::npos) {
                break;
            }
            at = nl + 1;
        }
    }
    if (!report_violations(r, input).empty()) {
        return std::nullopt;
    }
    return r;
}

DiagnosticReport generate_report(const PromptInput& input, const LlmClient* client) {
    if (!client) {
        return render_offline(input);
    }
    const std::string prompt = build_prompt(input);
    const std::string reminder =
        "\nYour previous answer could not be used. Reply with exactly three sections: 'RATIONALE:' naming the "
        "features above, 'RECOMMENDATIONS:' with one '- ' line per step, and a final line 'DECISION: AD' or "
        "'DECISION: nonAD'.\n";
    std::vector<std::string> warnings;
    for (int attempt = 1; attempt <= 2; ++attempt) {
        try {
            const auto text = client->complete(attempt == 1 ? prompt : prompt + reminder);
            if (auto r = parse_llm_report(text, input)) {
                r->warnings = warnings;
                return *r;
            }
            warnings.push_back("attempt " + std::to_string(attempt) + ": completion could not be parsed");
        } catch (const std::exception& e) {
            warnings.push_back("attempt " + std::to_string(attempt) + ": " + e.what());
        }
    }
    auto r = render_offline(input);
    warnings.push_back("LLM output unusable after retry; offline report used");
    warnings.insert(warnings.end(), r.warnings.begin(), r.warnings.end());
    r.warnings = std::move(warnings);
    return r;
}

std::vector<std::string> report_violations(const DiagnosticReport& r, const PromptInput& in) {
    std::vector<std::string> out;
    if (r.source_probability != in.probability) {
        out.push_back("source probability differs from the input");
    }
    if (r.audience != in.audience) {
        out.push_back("audience differs from the input");
    }
    if (r.generator == Generator::Offline && r.decision != decide(r.source_probability)) {
        out.push_back("offline decision disagrees with the 0.5 threshold");
    }
    if (r.rationale.empty()) {
        out.push_back("empty rationale");
    }
    bool any_eligible = false, mentioned = false;
    for (const auto& f : in.top_features) {
        if (r.audience == Audience::Patient && find_blocklisted(f.name)) {
            continue;
        }
        any_eligible = true;
        mentioned = mentioned || r.rationale.find(f.name) != std::string::npos;
    }
    if (any_eligible && !mentioned) {
        out.push_back("rationale names no top feature");
    }
    if (r.recommendations.empty()) {
        out.push_back("no recommendations");
    }
    for (const auto& rec : r.recommendations) {
        if (trim(rec).empty()) {
            out.push_back("empty recommendation");
        }
    }
    if (r.audience == Audience::Patient) {
        if (auto term = find_blocklisted(r.rationale)) {
            out.push_back("patient rationale uses technical term '" + *term + "'");
        }
        for (const auto& rec : r.recommendations) {
            if (auto term = find_blocklisted(rec)) {
                out.push_back("patient recommendation uses technical term '" + *term + "'");
            }
        }
    }
    return out;
}

std::string format_report_json(const DiagnosticReport& r) {
    json j = {{"decision", to_string(r.decision)},
              {"rationale", r.rationale},
              {"recommendations", r.recommendations},
              {"audience", to_string(r.audience)},
              {"source_probability", r.source_probability},
              {"generator", to_string(r.generator)},
              {"warnings", r.warnings}};
    return j.dump(2) + "\n";
}

DiagnosticReport parse_report_json(std::string_view text) {
    DiagnosticReport r;
    try {
        const json j = json::parse(text);
        r.decision = parse_diagnosis(j.at("decision").get<std::string>());
        r.rationale = j.at("rationale").get<std::string>();
        r.recommendations = j.at("recommendations").get<std::vector<std::string>>();
        r.audience = parse_audience(j.at("audience").get<std::string>());
        r.source_probability = j.at("source_probability").get<double>();
        const auto gen = j.at("generator").get<std::string>();
        if (gen != "llm" && gen != "offline") {
            throw ValidationError("generator must be llm or offline");
        }
        r.generator = gen == "llm" ? Generator::Llm : Generator::Offline;
        r.warnings = j.value("warnings", std::vector<std::string>{});
    } catch (const json::exception& e) {
        throw ValidationError(std::string("report JSON: ") + e.what());
    }
    return r;
}

std::string format_report_markdown(const DiagnosticReport& r) {
    std::string out;
    if (r.audience == Audience::Clinician) {
        out += "# Diagnostic report (clinician)\n\n";
        out += "**Decision:** " + std::string(to_string(r.decision)) + " (p(AD) = " + format_short(r.source_probability) +
               ", generator: " + std::string(to_string(r.generator)) + ")\n\n";
        out += "## Rationale\n\n" + r.rationale + "\n\n## Recommendations\n\n";
    } else {
        const auto percent = static_cast<int>(std::lround(100.0 * r.source_probability));
        out += "# Your diagnostic summary\n\n";
        out += "**Result:** " + std::string(r.decision == Diagnosis::AD ? "signs of" : "no clear signs of") +
               " Alzheimer's disease (estimated chance " + std::to_string(percent) + "%)\n\n";
        out += "## What this is based on\n\n" + r.rationale + "\n\n## Next steps\n\n";
    }
    for (const auto& rec : r.recommendations) {
        out += "- " + rec + "\n";
    }
    if (r.audience == Audience::Clinician && !r.warnings.empty()) {
        out += "\n## Notes\n\n";
        for (const auto& w : r.warnings) {
            out += "- " + w + "\n";
        }
    }
    return out;
}

} // namespace diagno
