#pragma once

#include "diagno/prompt.hpp"
#include "diagno/random.hpp"

#include <string>
#include <vector>

namespace fixtures {

/// High-risk APOE carrier with lipid and renal drivers.
inline diagno::PromptInput patient_a() {
    diagno::PromptInput in;
    in.probability = 0.83;
    in.predicted = diagno::decide(in.probability);
    in.audience = diagno::Audience::Clinician;
    in.top_features = {
        {"triglycerides", 220.78, 0.91, diagno::ReferenceRange{0.0, 150.0, "mg/dL"}},
        {"beta:APOE", 0.42, 0.66, std::nullopt},
        {"albumin", 3.1, 0.35, diagno::ReferenceRange{3.5, 5.0, "g/dL"}},
        {"creatinine", 1.6, 0.28, diagno::ReferenceRange{0.6, 1.2, "mg/dL"}},
        {"diet_score", 2.0, 0.12, std::nullopt},
    };
    in.domain_knowledge = {{"APOE", "APOE e4 carriers show impaired lipid transport and amyloid clearance."}};
    return in;
}

/// Low-risk APOE non-carrier with vascular and sleep markers.
inline diagno::PromptInput patient_b() {
    diagno::PromptInput in;
    in.probability = 0.10;
    in.predicted = diagno::decide(in.probability);
    in.audience = diagno::Audience::Patient;
    in.top_features = {
        {"age", 80.37, 0.30, std::nullopt},
        {"homocysteine", 16.26, 0.22, diagno::ReferenceRange{5.0, 15.0, "umol/L"}},
        {"ldl_cholesterol", 111.93, 0.15, diagno::ReferenceRange{0.0, 100.0, "mg/dL"}},
        {"sleep_hours", 5.0, -0.41, diagno::ReferenceRange{7.0, 9.0, "h"}},
    };
    return in;
}

/// Random valid input over a name pool mixing every feature family and unknown names.
inline diagno::PromptInput random_input(diagno::Random& rng) {
    static const std::vector<std::string> pool{
        "cts:APOE:astrocyte", "cts:TREM2:microglia", "cts:CLU:oligodendrocyte", "beta:APOE", "se:APOE",
        "pval:APOE", "beta:BIN1", "pval:ABCA7", "age", "sex", "batch", "bmi", "ldl_cholesterol", "hdl",
        "homocysteine", "creatinine", "egfr", "vitamin_b12", "sleep_hours", "mmse", "education_years",
        "systolic_pressure", "triglycerides", "albumin", "zz_unknown_marker", "Q7"};
    diagno::PromptInput in;
    const double u = rng.uniform();
    in.probability = u < 0.05 ? 0.5 : u < 0.08 ? 0.0 : u < 0.11 ? 1.0 : rng.uniform();
    in.predicted = diagno::decide(in.probability);
    in.audience = rng.uniform() < 0.5 ? diagno::Audience::Clinician : diagno::Audience::Patient;
    const int s = static_cast<int>(rng.index(3));
    in.strategy = s == 0 ? diagno::Strategy::Direct : s == 1 ? diagno::Strategy::StepByStep : diagno::Strategy::StepByStepDomain;
    std::vector<std::string> names = pool;
    const std::size_t k = 1 + rng.index(6);
    for (std::size_t j = 0; j < k; ++j) {
        std::swap(names[j], names[j + rng.index(names.size() - j)]);
        diagno::TopFeature f{names[j], 10.0 * rng.normal(), rng.normal(), std::nullopt};
        if (rng.uniform() < 0.3) {
            const double lo = rng.normal();
            f.range = diagno::ReferenceRange{lo, lo + 1.0 + rng.uniform(), "u"};
        }
        if (rng.uniform() < 0.1) {
            f.attribution = 0.0;
        }
        in.top_features.push_back(f);
        in.population_stats[f.name] = {rng.normal(), rng.normal(), 0.5 + rng.uniform()};
    }
    in.domain_knowledge = {{"APOE", "APOE e4 raises risk."}, {"sleep", "Short sleep is linked to amyloid build-up."}};
    return in;
}

} // namespace fixtures
