#include "diagno/io.hpp"

#include "diagno/errors.hpp"
#include "diagno/numeric_format.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <system_error>
#include <unistd.h>

namespace diagno {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open '" + path.string() + "' for reading");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_atomic(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            throw std::runtime_error("write to '" + tmp.string() + "' failed");
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw std::runtime_error("cannot rename onto '" + path.string() + "': " + ec.message());
    }
}

std::vector<std::string> split_tabs(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find('\t', start);
        if (pos == std::string_view::npos) {
            out.emplace_back(line.substr(start));
            break;
        }
        out.emplace_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (start < text.size()) {
        auto pos = text.find('\n', start);
        auto line = text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        out.push_back(line);
        if (pos == std::string_view::npos) {
            break;
        }
        start = pos + 1;
    }
    return out;
}

LabelledMatrix parse_labelled_matrix(std::string_view text, const std::string& source) {
    auto lines = split_lines(text);
    while (!lines.empty() && lines.back().empty()) {
        lines.pop_back();
    }
    if (lines.empty()) {
        throw ParseError(source, 1, "empty matrix file");
    }
    auto header = split_tabs(lines[0]);
    if (header.size() < 2) {
        throw ParseError(source, 1, "header needs a corner label and at least one column");
    }
    LabelledMatrix out;
    out.cols.assign(header.begin() + 1, header.end());
    const std::size_t ncol = out.cols.size();
    std::vector<double> flat;
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
        if (lines[ln].empty()) {
            throw ParseError(source, ln + 1, "blank line inside matrix");
        }
        auto fields = split_tabs(lines[ln]);
        if (fields.size() != ncol + 1) {
            throw ParseError(source, ln + 1,
                             "expected " + std::to_string(ncol + 1) + " fields, found " + std::to_string(fields.size()));
        }
        out.rows.push_back(fields[0]);
        for (std::size_t j = 1; j < fields.size(); ++j) {
            auto v = parse_double(fields[j]);
            if (!v) {
                throw ParseError(source, ln + 1, "cannot parse value '" + fields[j] + "'");
            }
            if (!std::isfinite(*v)) {
                throw ParseError(source, ln + 1, "non-finite value '" + fields[j] + "'");
            }
            flat.push_back(*v);
        }
    }
    out.values.resize(static_cast<Eigen::Index>(out.rows.size()), static_cast<Eigen::Index>(ncol));
    for (std::size_t r = 0; r < out.rows.size(); ++r) {
        for (std::size_t c = 0; c < ncol; ++c) {
            out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = flat[r * ncol + c];
        }
    }
    return out;
}

std::string format_labelled_matrix(std::string_view corner, const std::vector<std::string>& rows,
                                   const std::vector<std::string>& cols, const Matrix& values) {
    std::string out(corner);
    for (const auto& c : cols) {
        out += '\t';
        out += c;
    }
    out += '\n';
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out += rows[r];
        for (std::size_t c = 0; c < cols.size(); ++c) {
            out += '\t';
            out += format_double(values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
        }
        out += '\n';
    }
    return out;
}

BulkMatrix parse_bulk_matrix(std::string_view text, const std::string& source) {
    auto lm = parse_labelled_matrix(text, source);
    return BulkMatrix(std::move(lm.rows), std::move(lm.cols), std::move(lm.values));
}

BulkMatrix load_bulk_matrix(const fs::path& path) {
    return parse_bulk_matrix(read_text_file(path), path.string());
}

std::string format_bulk_matrix(const BulkMatrix& bulk) {
    return format_labelled_matrix("gene", bulk.genes(), bulk.samples(), bulk.values());
}

void save_bulk_matrix(const BulkMatrix& bulk, const fs::path& path) {
    write_text_atomic(path, format_bulk_matrix(bulk));
}

fs::path cts_mean_path(const fs::path& prefix) {
    fs::path p = prefix;
    p += "_mean.tsv";
    return p;
}

fs::path cts_variance_path(const fs::path& prefix) {
    fs::path p = prefix;
    p += "_variance.tsv";
    return p;
}

std::string format_tensor_values(const CtsTensor& tensor, bool variance) {
    const auto& data = variance ? tensor.variance_data() : tensor.mean_data();
    std::string out = "gene\tcell_type\tsample\tvalue\n";
    for (std::size_t g = 0; g < tensor.num_genes(); ++g) {
        for (std::size_t c = 0; c < tensor.num_cell_types(); ++c) {
            for (std::size_t i = 0; i < tensor.num_samples(); ++i) {
                out += tensor.genes()[g];
                out += '\t';
                out += tensor.cell_types()[c];
                out += '\t';
                out += tensor.samples()[i];
                out += '\t';
                out += format_double(data[tensor.offset(g, c, i)]);
                out += '\n';
            }
        }
    }
    return out;
}

void save_cts_tensor(const CtsTensor& tensor, const fs::path& prefix) {
    write_text_atomic(cts_mean_path(prefix), format_tensor_values(tensor, false));
    write_text_atomic(cts_variance_path(prefix), format_tensor_values(tensor, true));
}

namespace {

struct LongTable {
    std::vector<std::string> genes, cell_types, samples;
    std::vector<double> values;
};

class AxisBuilder {
public:
    std::size_t intern(const std::string& id) {
        auto [it, inserted] = index_.emplace(id, ids_.size());
        if (inserted) {
            ids_.push_back(id);
        }
        return it->second;
    }
    std::vector<std::string> take() { return std::move(ids_); }
    std::size_t size() const { return ids_.size(); }

private:
    std::map<std::string, std::size_t> index_;
    std::vector<std::string> ids_;
};

LongTable parse_long_table(std::string_view text, const std::string& source) {
    auto lines = split_lines(text);
    while (!lines.empty() && lines.back().empty()) {
        lines.pop_back();
    }
    if (lines.empty() || lines[0] != "gene\tcell_type\tsample\tvalue") {
        throw ParseError(source, 1, "expected header 'gene<TAB>cell_type<TAB>sample<TAB>value'");
    }
    AxisBuilder genes, cts, samples;
    struct Entry {
        std::size_t g, c, i, line;
        double v;
    };
    std::vector<Entry> entries;
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
        auto f = split_tabs(lines[ln]);
        if (f.size() != 4) {
            throw ParseError(source, ln + 1, "expected 4 fields");
        }
        auto v = parse_double(f[3]);
        if (!v || !std::isfinite(*v)) {
            throw ParseError(source, ln + 1, "invalid value '" + f[3] + "'");
        }
        entries.push_back({genes.intern(f[0]), cts.intern(f[1]), samples.intern(f[2]), ln + 1, *v});
    }
    const std::size_t G = genes.size(), C = cts.size(), N = samples.size();
    if (entries.size() != G * C * N) {
        throw ParseError(source, lines.size(), "tensor rows do not form a complete gene x cell type x sample grid");
    }
    LongTable out;
    out.values.assign(G * C * N, 0.0);
    std::vector<char> seen(G * C * N, 0);
    for (const auto& e : entries) {
        const std::size_t off = (e.g * C + e.c) * N + e.i;
        if (seen[off]) {
            throw ParseError(source, e.line, "duplicate tensor entry");
        }
        seen[off] = 1;
        out.values[off] = e.v;
    }
    out.genes = genes.take();
    out.cell_types = cts.take();
    out.samples = samples.take();
    return out;
}

} // namespace

CtsTensor load_cts_tensor(const fs::path& prefix) {
    auto mp = cts_mean_path(prefix);
    auto vp = cts_variance_path(prefix);
    auto mean = parse_long_table(read_text_file(mp), mp.string());
    auto var = parse_long_table(read_text_file(vp), vp.string());
    if (mean.genes != var.genes || mean.cell_types != var.cell_types || mean.samples != var.samples) {
        throw ValidationError("mean and variance tensor files have different axes");
    }
    return CtsTensor(std::move(mean.genes), std::move(mean.cell_types), std::move(mean.samples),
                     std::move(mean.values), std::move(var.values));
}

std::string format_sample_metas(const std::vector<SampleMeta>& metas, const std::vector<std::string>& cell_types) {
    json arr = json::array();
    for (const auto& m : metas) {
        if (static_cast<std::size_t>(m.proportions().size()) != cell_types.size()) {
            throw ValidationError("sample '" + m.sample_id() + "' proportions do not match cell types");
        }
        json props = json::object();
        for (std::size_t c = 0; c < cell_types.size(); ++c) {
            props[cell_types[c]] = m.proportions()[static_cast<Eigen::Index>(c)];
        }
        json rec;
        rec["sample_id"] = m.sample_id();
        rec["proportions"] = props;
        rec["bulk_cov"] = std::vector<double>(m.bulk_cov().data(), m.bulk_cov().data() + m.bulk_cov().size());
        rec["cts_cov"] = std::vector<double>(m.cts_cov().data(), m.cts_cov().data() + m.cts_cov().size());
        arr.push_back(std::move(rec));
    }
    return arr.dump(2) + "\n";
}

namespace {

Vector to_vector(const json& arr) {
    auto v = arr.get<std::vector<double>>();
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

} // namespace

std::vector<SampleMeta> parse_sample_metas(std::string_view text, const std::vector<std::string>& cell_types) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("sample metadata JSON: ") + e.what());
    }
    if (!doc.is_array()) {
        throw ValidationError("sample metadata JSON must be an array");
    }
    std::vector<SampleMeta> out;
    for (const auto& rec : doc) {
        try {
            auto id = rec.at("sample_id").get<std::string>();
            const auto& props = rec.at("proportions");
            if (props.size() != cell_types.size()) {
                throw ValidationError("sample '" + id + "' lists " + std::to_string(props.size()) +
                                      " proportions, expected " + std::to_string(cell_types.size()));
            }
            Vector w(static_cast<Eigen::Index>(cell_types.size()));
            for (std::size_t c = 0; c < cell_types.size(); ++c) {
                w[static_cast<Eigen::Index>(c)] = props.at(cell_types[c]).get<double>();
            }
            Vector c1 = rec.contains("bulk_cov") ? to_vector(rec["bulk_cov"]) : Vector();
            Vector c2 = rec.contains("cts_cov") ? to_vector(rec["cts_cov"]) : Vector();
            out.emplace_back(std::move(id), std::move(w), std::move(c1), std::move(c2));
        } catch (const json::exception& e) {
            throw ValidationError(std::string("sample metadata JSON: ") + e.what());
        }
    }
    if (!out.empty()) {
        const auto d1 = out.front().bulk_cov().size();
        const auto d2 = out.front().cts_cov().size();
        for (const auto& m : out) {
            if (m.bulk_cov().size() != d1 || m.cts_cov().size() != d2) {
                throw ValidationError("covariate vectors have inconsistent lengths across samples");
            }
        }
    }
    return out;
}

void save_sample_metas(const std::vector<SampleMeta>& metas, const std::vector<std::string>& cell_types,
                       const fs::path& path) {
    write_text_atomic(path, format_sample_metas(metas, cell_types));
}

std::vector<SampleMeta> load_sample_metas(const fs::path& path, const std::vector<std::string>& cell_types) {
    return parse_sample_metas(read_text_file(path), cell_types);
}

std::vector<std::string> sample_meta_cell_types(const fs::path& path) {
    json doc;
    try {
        doc = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("sample metadata JSON: ") + e.what());
    }
    if (!doc.is_array() || doc.empty() || !doc[0].contains("proportions")) {
        throw ValidationError("sample metadata JSON has no records");
    }
    std::vector<std::string> out;
    for (const auto& [k, _] : doc[0]["proportions"].items()) {
        out.push_back(k);
    }
    return out;
}

std::vector<SampleMeta> align_metas(const std::vector<SampleMeta>& metas, const std::vector<std::string>& samples) {
    std::map<std::string, const SampleMeta*> by_id;
    for (const auto& m : metas) {
        by_id[m.sample_id()] = &m;
    }
    std::vector<SampleMeta> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        auto it = by_id.find(s);
        if (it == by_id.end()) {
            throw ValidationError("no metadata for sample '" + s + "'");
        }
        out.push_back(*it->second);
    }
    return out;
}

std::string format_adjustments(const std::vector<AdjustmentParams>& params, const std::vector<std::string>& genes) {
    if (params.size() != genes.size()) {
        throw ValidationError("need one set of adjustments per gene");
    }
    json doc = json::object();
    for (std::size_t g = 0; g < genes.size(); ++g) {
        const auto& p = params[g];
        json b = json::array();
        for (Eigen::Index c = 0; c < p.b.rows(); ++c) {
            std::vector<double> row(static_cast<std::size_t>(p.b.cols()));
            for (Eigen::Index k = 0; k < p.b.cols(); ++k) {
                row[static_cast<std::size_t>(k)] = p.b(c, k);
            }
            b.push_back(row);
        }
        doc[genes[g]] = {{"gamma", std::vector<double>(p.gamma.data(), p.gamma.data() + p.gamma.size())}, {"b", b}};
    }
    return doc.dump(2) + "\n";
}

std::vector<AdjustmentParams> parse_adjustments(std::string_view text, const std::vector<std::string>& genes) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("adjustment JSON: ") + e.what());
    }
    std::vector<AdjustmentParams> out;
    for (const auto& gene : genes) {
        try {
            const auto& rec = doc.at(gene);
            AdjustmentParams p;
            p.gamma = to_vector(rec.at("gamma"));
            const auto rows = rec.at("b").get<std::vector<std::vector<double>>>();
            const std::size_t cols = rows.empty() ? 0 : rows.front().size();
            p.b.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
            for (std::size_t c = 0; c < rows.size(); ++c) {
                if (rows[c].size() != cols) {
                    throw ValidationError("adjustment matrix of gene '" + gene + "' is ragged");
                }
                for (std::size_t k = 0; k < cols; ++k) {
                    p.b(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k)) = rows[c][k];
                }
            }
            out.push_back(std::move(p));
        } catch (const json::exception& e) {
            throw ValidationError("adjustment JSON, gene '" + gene + "': " + e.what());
        }
    }
    return out;
}

} // namespace diagno
