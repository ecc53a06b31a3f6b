#include "aniso/log.hpp"
#include "aniso/parallel.hpp"
#include "aniso/pipeline.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>

namespace {

enum Exit { kOk = 0, kInput = 2, kNumerical = 3 };

using Overrides = std::map<std::string, std::string>;

void add_value(CLI::App* app, Overrides& ov, const std::string& flags, const std::string& key, const std::string& help) {
    app->add_option_function<std::string>(flags, [&ov, key](const std::string& v) { ov[key] = v; }, help);
}

void add_switch(CLI::App* app, Overrides& ov, const std::string& flags, const std::string& key, const std::string& value,
                const std::string& help) {
    app->add_flag_callback(flags, [&ov, key, value] { ov[key] = value; }, help);
}

void common_options(CLI::App* app, Overrides& ov, std::optional<std::string>& config) {
    app->add_option("--config", config, "TOML or JSON config file (flags override it)");
    add_value(app, ov, "-o,--output", "output_dir", "Output directory");
    add_value(app, ov, "--threads", "threads", "Worker cap (overrides ANISO_THREADS)");
    add_value(app, ov, "--log-level", "log_level", "debug|info|warn|error|off");
}

void mesh_options(CLI::App* app, Overrides& ov) {
    add_value(app, ov, "-i,--input", "input", "Input mesh (OBJ/OFF)");
    add_value(app, ov, "--metric", "metric_path", "Precomputed metric (.met or .json)");
    add_value(app, ov, "--metric-floor", "metric.floor", "Curvature floor");
    add_value(app, ov, "--metric-ceil", "metric.ceil", "Stretch ratio ceiling");
    add_value(app, ov, "--smooth-iters", "metric.smooth_iterations", "Stretch smoothing iterations");
    add_value(app, ov, "--rings", "metric.radius_rings", "Curvature fit neighborhood rings");
}

void cvt_options(CLI::App* app, Overrides& ov) {
    add_value(app, ov, "--embedding", "embedding.path", "Embedding file (.hde)");
    add_value(app, ov, "--embedding-source", "embedding.source", "deterministic|file|neural-file");
    add_value(app, ov, "--sites", "sites", "Site count (>= 4)");
    add_value(app, ov, "--site-fraction", "site_fraction", "Site count as a fraction of input vertices");
    add_value(app, ov, "-s,--normal-emphasis", "s", "Normal metric factor s");
    add_value(app, ov, "--seed", "seed", "Random seed");
    add_value(app, ov, "--max-iters", "max_iters", "Optimizer iteration cap");
    add_value(app, ov, "--grad-tol", "grad_tol", "Relative gradient tolerance");
    add_value(app, ov, "--repair-budget", "repair.budget", "Maximum inserted sites");
    add_switch(app, ov, "--no-normal-metric", "nm_cvt.enabled", "false", "Plain CVT (s = 1)");
}

void eval_options(CLI::App* app, Overrides& ov) {
    add_value(app, ov, "--samples", "eval.samples", "Surface samples per mesh");
    add_value(app, ov, "--f1-tau", "eval.f1_tau", "F-score distance threshold");
    add_value(app, ov, "--dihedral", "eval.dihedral_deg", "Sharp edge threshold in degrees");
    add_value(app, ov, "--eval-seed", "eval.seed", "Sampling seed");
    add_value(app, ov, "--method", "method", "Method label in reports");
}

aniso::log::Level parse_level(const std::string& s) {
    using aniso::log::Level;
    if (s == "debug") return Level::Debug;
    if (s == "info") return Level::Info;
    if (s == "warn") return Level::Warn;
    if (s == "error") return Level::Error;
    if (s == "off") return Level::Off;
    throw aniso::InputError("unknown log level '" + s + "'");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Feature-sensitive anisotropic remeshing through a high-dimensional embedding"};
    app.require_subcommand(1);
    Overrides ov;
    std::optional<std::string> config;

    auto* metric = app.add_subcommand("metric", "Estimate the curvature metric");
    common_options(metric, ov, config);
    mesh_options(metric, ov);

    auto* embed = app.add_subcommand("embed", "Solve the 8D embedding (.hde)");
    common_options(embed, ov, config);
    mesh_options(embed, ov);

    auto* remesh = app.add_subcommand("remesh", "Optimize sites and extract the remeshed surface");
    common_options(remesh, ov, config);
    mesh_options(remesh, ov);
    cvt_options(remesh, ov);

    auto* eval = app.add_subcommand("eval", "Compare a result mesh (or directory) against a reference");
    common_options(eval, ov, config);
    mesh_options(eval, ov);
    eval_options(eval, ov);
    add_value(eval, ov, "-r,--reference", "reference", "Reference mesh or directory");

    auto* pipeline = app.add_subcommand("pipeline", "metric -> embed -> remesh -> eval");
    common_options(pipeline, ov, config);
    mesh_options(pipeline, ov);
    cvt_options(pipeline, ov);
    eval_options(pipeline, ov);
    add_switch(pipeline, ov, "--no-eval", "eval.enabled", "false", "Skip evaluation");

    auto* loss = app.add_subcommand("loss-check", "Print embedding losses of a prediction against a truth");
    common_options(loss, ov, config);
    add_value(loss, ov, "--truth", "truth", "Ground-truth .hde");
    add_value(loss, ov, "--pred", "pred", "Predicted .hde");
    add_value(loss, ov, "--w-lap", "w_lap", "Laplacian loss weight");
    add_value(loss, ov, "--variant", "loss.variant", "dot|l2|cos (ablation losses)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInput;
    }

    try {
        aniso::PipelineConfig cfg = config ? aniso::load_config(*config) : aniso::PipelineConfig{};
        for (const auto& [k, v] : ov) aniso::apply_setting(cfg, k, v);
        aniso::log::set_level(parse_level(cfg.log_level));
        if (cfg.threads > 0) aniso::set_worker_count(cfg.threads);

        if (metric->parsed()) {
            const auto s = aniso::run_metric(cfg);
            fmt::print("metric: {} (mean ratio {:.4g}, max {:.4g})\n", s.met_path.string(), s.mean_ratio, s.max_ratio);
        } else if (embed->parsed()) {
            const auto s = aniso::run_embed(cfg);
            fmt::print("embedding: {} ({:.3f} s, median edge distortion {:.4f})\n", s.hde_path.string(), s.seconds,
                       s.distortion_median);
        } else if (remesh->parsed()) {
            const auto s = aniso::run_remesh(cfg);
            fmt::print("mesh: {} ({} vertices, {} sites, {:.2f} s)\n", s.mesh_path.string(), s.vertices, s.sites, s.seconds);
            if (s.repair_failed) {
                aniso::log::error("cli", fmt::format("{} inverted elements remain after repair", s.inverted));
                return kNumerical;
            }
        } else if (eval->parsed()) {
            const auto s = aniso::run_eval(cfg);
            fmt::print("{}\n", aniso::csv_header());
            for (const auto& r : s.reports) fmt::print("{}\n", aniso::csv_row(r));
        } else if (pipeline->parsed()) {
            const auto s = aniso::run_pipeline(cfg);
            fmt::print("mesh: {} ({} vertices)\n", s.remesh.mesh_path.string(), s.remesh.vertices);
            if (s.report) fmt::print("{}\n{}\n", aniso::csv_header(), aniso::csv_row(*s.report));
            if (s.remesh.repair_failed) return kNumerical;
        } else if (loss->parsed()) {
            const auto r = aniso::run_loss_check(cfg);
            const auto& l = r.loss;
            fmt::print("{{\"l_dot\": {:.17g}, \"l_lap\": {:.17g}, \"w_lap\": {:.17g}, \"total\": {:.17g}, \"variant\": \"{}\", "
                       "\"variant_value\": {:.17g}}}\n",
                       l.l_dot, l.l_lap, l.w_lap, l.total, r.variant, r.variant_value);
        }
    } catch (const aniso::Error& e) {
        aniso::log::error("cli", e.what());
        return e.kind() == aniso::ErrorKind::Input ? kInput : kNumerical;
    } catch (const std::filesystem::filesystem_error& e) {
        aniso::log::error("cli", e.what());
        return kInput;
    } catch (const std::exception& e) {
        aniso::log::error("cli", e.what());
        return kNumerical;
    }
    return kOk;
}
