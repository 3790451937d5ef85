#pragma once

#include "diagno/gene_select.hpp"
#include "diagno/types.hpp"

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace diagno {

/// Numeric settings of the deconvolve command.
struct DeconvolveConfig {
    RefinementConfig refinement;
    double shrinkage = kDefaultShrinkage;
};

std::string format_deconvolve_config(const DeconvolveConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
DeconvolveConfig parse_deconvolve_config(std::string_view text);

std::string format_selection_options(const SelectionOptions& o);
SelectionOptions parse_selection_options(std::string_view text);

/// Settings of the attribute and report commands.
struct AttributionConfig {
    int steps = 200;
    std::size_t top_k = 5;
    std::string model = "gpt-4o-mini";
};

std::string format_attribution_config(const AttributionConfig& c);
AttributionConfig parse_attribution_config(std::string_view text);

struct DivergenceConfig {
    std::size_t conflict_size = 100;
    double ood_threshold = 1.0;
    /// 0 means no limit.
    std::size_t ood_size = 0;
};

std::string format_divergence_config(const DivergenceConfig& c);
DivergenceConfig parse_divergence_config(std::string_view text);

/**
 * Entry point of the `diagno` tool. Returns the process exit code: 0 on success,
 * 1 on usage or validation errors, 2 on runtime errors.
 */
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace diagno
