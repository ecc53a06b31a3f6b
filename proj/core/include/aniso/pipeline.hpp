#pragma once

#include "aniso/embed_loss.hpp"
#include "aniso/quality_eval.hpp"
#include "aniso/remesh_extract.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace aniso {

enum class EmbedSource { Deterministic, File, NeuralFile };

struct PipelineConfig {
    std::filesystem::path input;
    std::filesystem::path output_dir = "out";
    std::filesystem::path reference;      // eval: mesh (or directory) to compare against
    std::filesystem::path metric_path;    // embed: precomputed metric instead of curvature
    std::filesystem::path embedding_path; // remesh: `.hde` for the file sources
    EmbedSource embed_source = EmbedSource::Deterministic;

    int sites = 0;              // > 0 wins over the fraction
    double site_fraction = 1.0; // of the input vertex count
    double s = kDefaultNormalEmphasis;
    double w_lap = kDefaultLaplacianWeight;
    std::uint64_t seed = 1;

    MetricOptions metric;
    bool normal_metric = true;
    int max_iters = 500;
    double grad_tol = 1e-3;
    RepairOptions repair;

    bool eval_enabled = true;
    EvalOptions eval;
    std::string method = "NASM";

    // loss-check
    std::filesystem::path truth, pred;
    std::string loss_variant = "dot"; // dot | l2 | cos

    int threads = 0;
    std::string log_level = "info";

    /// Site count for an input with `input_vertices` vertices.
    int site_count(std::size_t input_vertices) const;
    /// Throws InputError on out-of-range values.
    void validate() const;
};

/// Applies `key = value` (dotted keys, e.g. `metric.floor`). Throws InputError on unknown
/// keys or malformed values.
void apply_setting(PipelineConfig& cfg, const std::string& key, const std::string& value);

/// Flat key/value view of a TOML subset (sections, `key = value`, strings, numbers, booleans,
/// `#` comments) or JSON (nested objects flattened with dots). Throws ParseError.
std::map<std::string, std::string> parse_config_text(std::string_view text, bool json, const std::string& name);

/// Defaults overlaid with the file; `.json` selects JSON, anything else the TOML subset.
PipelineConfig load_config(const std::filesystem::path& path);

struct MetricSummary {
    std::filesystem::path met_path, json_path;
    double mean_ratio = 1, max_ratio = 1;
};

struct EmbedSummary {
    std::filesystem::path hde_path;
    double seconds = 0;
    double distortion_median = 1;
};

struct RemeshSummary {
    std::filesystem::path mesh_path, trace_path, rvd_path, rvd_dump_path, repair_path;
    int sites = 0;
    int vertices = 0;
    int inverted = 0;
    bool repair_failed = false;
    bool line_search_failed = false;
    double seconds = 0;
    double initial_grad_norm = 0, final_grad_norm = 0;
};

struct EvalSummary {
    std::vector<QualityReport> reports;
    std::filesystem::path csv_path;
};

struct LossCheckResult {
    LossBreakdown loss;
    std::string variant = "dot";
    double variant_value = 0; // equals loss.total for "dot"
};

struct PipelineSummary {
    EmbedSummary embed;
    RemeshSummary remesh;
    std::optional<QualityReport> report;
};

/// Input mesh mapped into the unit box.
NormalizedMesh load_normalized(const std::filesystem::path& path);

MetricSummary run_metric(const PipelineConfig& cfg);
EmbedSummary run_embed(const PipelineConfig& cfg);
RemeshSummary run_remesh(const PipelineConfig& cfg);
EvalSummary run_eval(const PipelineConfig& cfg);
PipelineSummary run_pipeline(const PipelineConfig& cfg);
LossCheckResult run_loss_check(const PipelineConfig& cfg);

} // namespace aniso
