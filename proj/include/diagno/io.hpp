#pragma once

#include "diagno/types.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace diagno {

std::string read_text_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file, then renames over the target.
void write_text_atomic(const std::filesystem::path& path, std::string_view content);

std::vector<std::string> split_tabs(std::string_view line);

/// Splits text into lines, dropping a trailing '\r' from each.
std::vector<std::string_view> split_lines(std::string_view text);

// Matrix TSV: header `gene<TAB>sample1<TAB>...`, then one gene per row.
BulkMatrix parse_bulk_matrix(std::string_view text, const std::string& source = "<memory>");
BulkMatrix load_bulk_matrix(const std::filesystem::path& path);
std::string format_bulk_matrix(const BulkMatrix& bulk);
void save_bulk_matrix(const BulkMatrix& bulk, const std::filesystem::path& path);

/// Generic labelled matrix (rows x columns) in the same TSV layout, used for references.
struct LabelledMatrix {
    std::vector<std::string> rows;
    std::vector<std::string> cols;
    Matrix values;
};
LabelledMatrix parse_labelled_matrix(std::string_view text, const std::string& source);
std::string format_labelled_matrix(std::string_view corner, const std::vector<std::string>& rows,
                                   const std::vector<std::string>& cols, const Matrix& values);

// Tensor TSV (long): header `gene<TAB>cell_type<TAB>sample<TAB>value`.
// A tensor is stored as `<prefix>_mean.tsv` and `<prefix>_variance.tsv`.
std::filesystem::path cts_mean_path(const std::filesystem::path& prefix);
std::filesystem::path cts_variance_path(const std::filesystem::path& prefix);
void save_cts_tensor(const CtsTensor& tensor, const std::filesystem::path& prefix);
CtsTensor load_cts_tensor(const std::filesystem::path& prefix);
std::string format_tensor_values(const CtsTensor& tensor, bool variance);

// SampleMeta JSON: `[{sample_id, proportions: {cellType: value}, bulk_cov: [..], cts_cov: [..]}]`.
std::string format_sample_metas(const std::vector<SampleMeta>& metas, const std::vector<std::string>& cell_types);
std::vector<SampleMeta> parse_sample_metas(std::string_view text, const std::vector<std::string>& cell_types);
void save_sample_metas(const std::vector<SampleMeta>& metas, const std::vector<std::string>& cell_types,
                       const std::filesystem::path& path);
std::vector<SampleMeta> load_sample_metas(const std::filesystem::path& path,
                                          const std::vector<std::string>& cell_types);
/// Cell types named in the first record, in sorted order.
std::vector<std::string> sample_meta_cell_types(const std::filesystem::path& path);

/// Reorders metas to follow the bulk sample order; throws if any sample is missing.
std::vector<SampleMeta> align_metas(const std::vector<SampleMeta>& metas, const std::vector<std::string>& samples);

// Adjustment JSON: `{gene: {gamma: [..], b: [[..], ..]}}`, rows of b per cell type.
std::string format_adjustments(const std::vector<AdjustmentParams>& params, const std::vector<std::string>& genes);
std::vector<AdjustmentParams> parse_adjustments(std::string_view text, const std::vector<std::string>& genes);

} // namespace diagno
