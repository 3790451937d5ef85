#pragma once

#include "diagno/cli.hpp"
#include "diagno/divergence.hpp"
#include "diagno/features.hpp"
#include "diagno/io.hpp"

#include <cstdlib>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fixtures {

struct CliRun {
    int code = 0;
    std::string out;
    std::string err;
};

inline CliRun run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = diagno::run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

/// Fixed manifest timestamps and no LLM endpoint for reproducible runs.
inline void pin_environment() {
    ::setenv("SOURCE_DATE_EPOCH", "1700000000", 1);
    ::unsetenv("DIAGNO_LLM_URL");
    ::unsetenv("DIAGNO_LLM_KEY");
}

/**
 * Runs every subcommand on small inputs under `root` with the given thread count.
 * Returns the failing command line, or an empty string when every step exits 0.
 */
inline std::string run_pipeline(const std::filesystem::path& root, const std::string& threads) {
    namespace fs = std::filesystem;
    fs::remove_all(root);
    fs::create_directories(root);
    const auto p = [&](const std::string& rel) { return (root / rel).string(); };
    diagno::write_text_atomic(root / "sim.json", R"({"genes": 8, "samples": 12, "cells_per_type": 15})");
    diagno::write_text_atomic(root / "dec.json", R"({"iters": 40, "chains": 2, "rounds": 2})");
    diagno::write_text_atomic(root / "train.json", R"({"max_epochs": 30, "lr": 0.01})");
    diagno::ClassificationScenario sc;
    sc.samples = 120;
    diagno::write_text_atomic(root / "data.tsv", diagno::format_dataset(diagno::make_classification_dataset(sc)));

    const std::vector<std::vector<std::string>> steps{
        {"simulate", "--config", p("sim.json"), "--seed", "7", "--out", p("sim")},
        {"select-genes", "--reference", p("sim/reference.tsv"), "--labels", p("sim/reference_labels.json"), "--out",
         p("sel")},
        {"deconvolve", "--bulk", p("sim/bulk.tsv"), "--metas", p("sim/metas.json"), "--reference",
         p("sim/reference.tsv"), "--labels", p("sim/reference_labels.json"), "--config", p("dec.json"), "--seed", "3",
         "--out", p("dec")},
        {"eval", "--estimate", p("dec/cts"), "--truth", p("sim/truth"), "--bulk", p("sim/bulk.tsv"), "--metas",
         p("sim/metas.json"), "--out", p("eval")},
        {"train", "--dataset", p("data.tsv"), "--config", p("train.json"), "--seed", "5", "--out", p("train")},
        {"attribute", "--model", p("train/model.json"), "--features", p("data.tsv"), "--out", p("attr")},
        {"report", "--model", p("train/model.json"), "--features", p("data.tsv"), "--sample", "P00002", "--audience",
         "patient", "--strategy", "direct", "--offline", "--out", p("report")},
        {"diverge", "--model", p("train/model.json"), "--dataset", p("data.tsv"), "--offline", "--out", p("diverge")},
    };
    for (auto args : steps) {
        args.push_back("--threads");
        args.push_back(threads);
        const auto r = run(args);
        if (r.code != 0) {
            std::string line;
            for (const auto& a : args) {
                line += a + " ";
            }
            return line + "-> exit " + std::to_string(r.code) + ": " + r.err;
        }
    }
    return {};
}

/// Every file under `root` keyed by relative path, with `root` itself replaced by a placeholder.
inline std::map<std::string, std::string> snapshot(const std::filesystem::path& root) {
    std::map<std::string, std::string> files;
    const std::string prefix = root.string();
    for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) {
            continue;
        }
        std::string text = diagno::read_text_file(e.path());
        for (std::size_t pos = text.find(prefix); pos != std::string::npos; pos = text.find(prefix, pos)) {
            text.replace(pos, prefix.size(), "<root>");
        }
        files[std::filesystem::relative(e.path(), root).generic_string()] = text;
    }
    return files;
}

} // namespace fixtures
