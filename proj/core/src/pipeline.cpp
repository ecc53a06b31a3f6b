#include "aniso/pipeline.hpp"

#include "aniso/log.hpp"
#include "aniso/parallel.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

namespace aniso {

namespace fs = std::filesystem;

namespace {

double to_double(const std::string& key, const std::string& v) {
    double out = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(out))
        throw InputError(fmt::format("config: '{}' expects a number, got '{}'", key, v));
    return out;
}

long long to_int(const std::string& key, const std::string& v) {
    long long out = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size())
        throw InputError(fmt::format("config: '{}' expects an integer, got '{}'", key, v));
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    throw InputError(fmt::format("config: '{}' expects a boolean, got '{}'", key, v));
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

void flatten_json(const nlohmann::json& j, const std::string& prefix, std::map<std::string, std::string>& out,
                  const std::string& name) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
        const auto& v = it.value();
        if (v.is_object())
            flatten_json(v, key, out, name);
        else if (v.is_string())
            out[key] = v.get<std::string>();
        else if (v.is_boolean())
            out[key] = v.get<bool>() ? "true" : "false";
        else if (v.is_number())
            out[key] = v.dump();
        else
            throw InputError(fmt::format("{}: unsupported value for '{}'", name, key));
    }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Prepared {
    NormalizedMesh input;
    MetricField field;
    EmbeddedMesh embedded;
    double embed_seconds = 0;
};

MetricField metric_for(const PipelineConfig& cfg, const SurfaceMesh& mesh) {
    if (!cfg.metric_path.empty()) {
        MetricField f = load_metric(cfg.metric_path);
        if (f.size() != mesh.num_vertices())
            throw InputError(fmt::format("metric file has {} tensors, mesh has {} vertices", f.size(), mesh.num_vertices()));
        check_metric(f);
        return f;
    }
    return curvature_metric(mesh, cfg.metric);
}

EmbeddedMesh embedding_for(const PipelineConfig& cfg, const SurfaceMesh& mesh, const MetricField& field) {
    if (cfg.embed_source == EmbedSource::Deterministic) return solve_embedding(mesh, field);
    if (cfg.embedding_path.empty()) throw InputError("embedding source needs embedding.path");
    EmbeddedMesh em = load_hde(cfg.embedding_path);
    check_first_channels(em, mesh);
    const EmbedProvenance want =
        cfg.embed_source == EmbedSource::NeuralFile ? EmbedProvenance::Neural : EmbedProvenance::Deterministic;
    if (em.provenance != want)
        log::warn("pipeline", fmt::format("embedding provenance is '{}', expected '{}'", to_string(em.provenance),
                                          to_string(want)));
    return em;
}

Prepared prepare(const PipelineConfig& cfg) {
    Prepared p;
    p.input = load_normalized(cfg.input);
    p.field = metric_for(cfg, p.input.mesh);
    const auto t0 = std::chrono::steady_clock::now();
    p.embedded = embedding_for(cfg, p.input.mesh, p.field);
    p.embed_seconds = seconds_since(t0);
    return p;
}

struct RemeshOutcome {
    RemeshSummary summary;
    SurfaceMesh mesh; // normalized coordinates
};

RemeshOutcome remesh_prepared(const PipelineConfig& cfg, const Prepared& p) {
    RemeshOutcome out;
    auto& sum = out.summary;
    const int n = cfg.site_count(p.input.mesh.num_vertices());
    fs::create_directories(cfg.output_dir);
    const auto t0 = std::chrono::steady_clock::now();

    CvtOptions cvt;
    cvt.s = cfg.s;
    cvt.normal_metric = cfg.normal_metric;
    cvt.max_iters = cfg.max_iters;
    cvt.grad_tol = cfg.grad_tol;
    const SiteSet init = init_sites(p.embedded, n, cfg.seed);
    const CvtResult opt = optimize(p.embedded, init, cvt);
    const RemeshResult rm = remesh(p.embedded, opt.sites, cvt, cfg.repair);
    sum.seconds = seconds_since(t0);

    sum.sites = static_cast<int>(rm.sites.size());
    sum.vertices = static_cast<int>(rm.mesh.num_vertices());
    sum.inverted = rm.inverted;
    sum.repair_failed = rm.failed;
    sum.line_search_failed = opt.line_search_failed;
    sum.initial_grad_norm = opt.initial_grad_norm;
    sum.final_grad_norm = opt.final_grad_norm;

    sum.mesh_path = cfg.output_dir / "remesh.obj";
    sum.trace_path = cfg.output_dir / "trace.csv";
    sum.rvd_path = cfg.output_dir / "rvd.obj";
    sum.rvd_dump_path = cfg.output_dir / "rvd.rvd";
    sum.repair_path = cfg.output_dir / "repair.json";
    save_mesh(apply_transform(rm.mesh, p.input.transform, true), sum.mesh_path);
    save_trace_csv(opt.trace, sum.trace_path);
    save_rvd_obj(rm.rvd3d, sum.rvd_path);
    save_rvd(compute_rvd(p.embedded, rm.sites), sum.rvd_dump_path);
    save_repair_log(rm.repair, sum.repair_path);
    if (opt.line_search_failed) log::warn("pipeline", "line search failed; returning the best sites found");
    out.mesh = rm.mesh;
    return out;
}

std::vector<fs::path> mesh_files(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto ext = e.path().extension();
        if (e.is_regular_file() && (ext == ".obj" || ext == ".off")) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

QualityReport evaluate_pair(const PipelineConfig& cfg, const fs::path& result_path, const fs::path& reference_path) {
    const NormalizedMesh ref = load_normalized(reference_path);
    const SurfaceMesh result = apply_transform(load_mesh(result_path), ref.transform);
    const MetricField field = cfg.eval.quality ? metric_for(cfg, ref.mesh) : MetricField::identity(ref.mesh.num_vertices());
    QualityReport r = evaluate(result, ref.mesh, field, cfg.eval);
    if (r.units_mismatch) log::warn("eval", fmt::format("{}: result and reference sizes differ by more than 10x", result_path.string()));
    return r;
}

} // namespace

int PipelineConfig::site_count(std::size_t input_vertices) const {
    if (sites > 0) return sites;
    return std::max(0, static_cast<int>(std::lround(site_fraction * static_cast<double>(input_vertices))));
}

void PipelineConfig::validate() const {
    if (sites != 0 && sites < 4) throw InputError(fmt::format("site count must be >= 4, got {}", sites));
    if (sites == 0 && !(site_fraction > 0 && site_fraction <= 1))
        throw InputError(fmt::format("site fraction must lie in (0, 1], got {}", site_fraction));
    if (!(s >= 1)) throw InputError("s must be >= 1");
    if (!(w_lap >= 0)) throw InputError("w_lap must be >= 0");
    if (!(metric.floor > 0) || !(metric.ceil >= 1)) throw InputError("metric floor must be > 0 and ceil >= 1");
    if (metric.smooth_iterations < 0 || metric.radius_rings < 1) throw InputError("metric smoothing/rings out of range");
    if (max_iters < 1) throw InputError("max_iters must be >= 1");
    if (!(grad_tol >= 0)) throw InputError("grad_tol must be >= 0");
    if (eval.samples < 1) throw InputError("eval.samples must be >= 1");
    if (!(eval.dihedral_deg > 0 && eval.dihedral_deg < 180)) throw InputError("eval.dihedral_deg must lie in (0, 180)");
    if (threads < 0) throw InputError("threads must be >= 0");
}

void apply_setting(PipelineConfig& c, const std::string& key, const std::string& v) {
    if (key == "input") c.input = v;
    else if (key == "output_dir") c.output_dir = v;
    else if (key == "reference") c.reference = v;
    else if (key == "metric_path") c.metric_path = v;
    else if (key == "embedding.path") c.embedding_path = v;
    else if (key == "embedding.source") {
        if (v == "deterministic") c.embed_source = EmbedSource::Deterministic;
        else if (v == "file") c.embed_source = EmbedSource::File;
        else if (v == "neural-file") c.embed_source = EmbedSource::NeuralFile;
        else throw InputError(fmt::format("config: unknown embedding source '{}'", v));
    }
    else if (key == "sites") c.sites = static_cast<int>(to_int(key, v));
    else if (key == "site_fraction") c.site_fraction = to_double(key, v);
    else if (key == "s") c.s = to_double(key, v);
    else if (key == "w_lap") c.w_lap = to_double(key, v);
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(to_int(key, v));
    else if (key == "metric.floor") c.metric.floor = to_double(key, v);
    else if (key == "metric.ceil") c.metric.ceil = to_double(key, v);
    else if (key == "metric.smooth_iterations") c.metric.smooth_iterations = static_cast<int>(to_int(key, v));
    else if (key == "metric.radius_rings") c.metric.radius_rings = static_cast<int>(to_int(key, v));
    else if (key == "nm_cvt.enabled") c.normal_metric = to_bool(key, v);
    else if (key == "max_iters") c.max_iters = static_cast<int>(to_int(key, v));
    else if (key == "grad_tol") c.grad_tol = to_double(key, v);
    else if (key == "repair.budget_fraction") c.repair.budget_fraction = to_double(key, v);
    else if (key == "repair.budget") c.repair.budget = static_cast<int>(to_int(key, v));
    else if (key == "repair.local_iters") c.repair.local_iters = static_cast<int>(to_int(key, v));
    else if (key == "eval.enabled") c.eval_enabled = to_bool(key, v);
    else if (key == "eval.samples") c.eval.samples = static_cast<int>(to_int(key, v));
    else if (key == "eval.f1_tau") c.eval.f1_tau = to_double(key, v);
    else if (key == "eval.dihedral_deg") c.eval.dihedral_deg = to_double(key, v);
    else if (key == "eval.seed") c.eval.seed = static_cast<std::uint64_t>(to_int(key, v));
    else if (key == "method") c.method = v;
    else if (key == "truth") c.truth = v;
    else if (key == "pred") c.pred = v;
    else if (key == "loss.variant") c.loss_variant = v;
    else if (key == "threads") c.threads = static_cast<int>(to_int(key, v));
    else if (key == "log_level") c.log_level = v;
    else throw InputError(fmt::format("config: unknown key '{}'", key));
}

std::map<std::string, std::string> parse_config_text(std::string_view text, bool json, const std::string& name) {
    std::map<std::string, std::string> out;
    if (json) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(name, 0, e.what());
        }
        if (!j.is_object()) throw ParseError(name, 1, "top level must be an object");
        flatten_json(j, "", out, name);
        return out;
    }
    std::string section;
    std::istringstream in{std::string(text)};
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        // Strip comments outside quotes.
        char quote = 0;
        std::size_t cut = raw.size();
        for (std::size_t i = 0; i < raw.size(); ++i) {
            const char ch = raw[i];
            if (quote) {
                if (ch == quote) quote = 0;
            } else if (ch == '"' || ch == '\'') {
                quote = ch;
            } else if (ch == '#') {
                cut = i;
                break;
            }
        }
        const std::string line = trim(std::string_view(raw).substr(0, cut));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError(name, lineno, "unterminated section header");
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            if (section.empty()) throw ParseError(name, lineno, "empty section name");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(name, lineno, "expected key = value");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        std::string value = trim(std::string_view(line).substr(eq + 1));
        if (key.empty() || value.empty()) throw ParseError(name, lineno, "expected key = value");
        if (value.front() == '"' || value.front() == '\'') {
            if (value.size() < 2 || value.back() != value.front()) throw ParseError(name, lineno, "unterminated string");
            value = value.substr(1, value.size() - 2);
        } else if (value.front() == '[' || value.front() == '{') {
            throw ParseError(name, lineno, "arrays and inline tables are not supported");
        }
        out[section.empty() ? key : section + "." + key] = value;
    }
    return out;
}

PipelineConfig load_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    PipelineConfig cfg;
    for (const auto& [k, v] : parse_config_text(ss.str(), path.extension() == ".json", path.string())) {
        try {
            apply_setting(cfg, k, v);
        } catch (const ParseError&) {
            throw;
        } catch (const InputError& e) {
            throw InputError(path.string() + ": " + e.what());
        }
    }
    return cfg;
}

NormalizedMesh load_normalized(const fs::path& path) {
    if (path.empty()) throw InputError("no input mesh given");
    const SurfaceMesh mesh = load_mesh(path);
    if (mesh.empty()) throw InputError(path.string() + ": mesh has no faces");
    const MeshDiagnostics d = validate(mesh);
    if (d.non_manifold_edges || d.degenerate_faces || d.orientation_inconsistent_edges)
        log::warn("mesh_io", fmt::format("{}: {} non-manifold edges, {} degenerate faces, {} inconsistent orientations",
                                         path.string(), d.non_manifold_edges, d.degenerate_faces,
                                         d.orientation_inconsistent_edges));
    return normalize_unit_box(mesh);
}

MetricSummary run_metric(const PipelineConfig& cfg) {
    cfg.validate();
    const NormalizedMesh nm = load_normalized(cfg.input);
    const MetricField f = metric_for(cfg, nm.mesh);
    fs::create_directories(cfg.output_dir);
    MetricSummary s;
    s.met_path = cfg.output_dir / "metric.met";
    s.json_path = cfg.output_dir / "metric.json";
    save_metric(f, s.met_path);
    save_metric(f, s.json_path);
    s.mean_ratio = f.mean_ratio();
    s.max_ratio = f.ratio.empty() ? 1.0 : *std::max_element(f.ratio.begin(), f.ratio.end());
    log::info("metric", fmt::format("vertices={} mean_ratio={:.4g} max_ratio={:.4g}", f.size(), s.mean_ratio, s.max_ratio));
    return s;
}

EmbedSummary run_embed(const PipelineConfig& cfg) {
    cfg.validate();
    const NormalizedMesh nm = load_normalized(cfg.input);
    const MetricField f = metric_for(cfg, nm.mesh);
    const auto t0 = std::chrono::steady_clock::now();
    const EmbeddedMesh em = solve_embedding(nm.mesh, f);
    EmbedSummary s;
    s.seconds = seconds_since(t0);
    s.distortion_median = edge_length_distortion(em, f).median;
    fs::create_directories(cfg.output_dir);
    s.hde_path = cfg.output_dir / "embedding.hde";
    save_hde(em, s.hde_path);
    log::info("embed", fmt::format("seconds={:.3f} distortion_median={:.4f}", s.seconds, s.distortion_median));
    return s;
}

RemeshSummary run_remesh(const PipelineConfig& cfg) {
    cfg.validate();
    const Prepared p = prepare(cfg);
    return remesh_prepared(cfg, p).summary;
}

EvalSummary run_eval(const PipelineConfig& cfg) {
    cfg.validate();
    if (cfg.reference.empty()) throw InputError("eval needs a reference mesh");
    EvalSummary out;
    fs::create_directories(cfg.output_dir);
    if (fs::is_directory(cfg.input)) {
        for (const auto& file : mesh_files(cfg.input)) {
            const fs::path ref = fs::is_directory(cfg.reference) ? cfg.reference / file.filename() : cfg.reference;
            QualityReport r = evaluate_pair(cfg, file, ref);
            r.method = file.stem().string();
            emit_report(r, cfg.output_dir / (file.stem().string() + ".json"));
            out.reports.push_back(r);
        }
        if (out.reports.empty()) throw InputError(cfg.input.string() + ": no meshes found");
    } else {
        QualityReport r = evaluate_pair(cfg, cfg.input, cfg.reference);
        r.method = cfg.method;
        emit_report(r, cfg.output_dir / "report.json");
        out.reports.push_back(r);
    }
    out.csv_path = cfg.output_dir / "report.csv";
    write_csv(out.reports, out.csv_path);
    return out;
}

PipelineSummary run_pipeline(const PipelineConfig& cfg) {
    cfg.validate();
    const Prepared p = prepare(cfg);
    fs::create_directories(cfg.output_dir);
    PipelineSummary out;
    if (cfg.embed_source == EmbedSource::Deterministic) {
        out.embed.hde_path = cfg.output_dir / "embedding.hde";
        save_hde(p.embedded, out.embed.hde_path);
        save_metric(p.field, cfg.output_dir / "metric.met");
    }
    out.embed.seconds = p.embed_seconds;
    out.embed.distortion_median = edge_length_distortion(p.embedded, p.field).median;
    RemeshOutcome rm = remesh_prepared(cfg, p);
    out.remesh = rm.summary;
    if (cfg.eval_enabled) {
        QualityReport r = evaluate(rm.mesh, p.input.mesh, p.field, cfg.eval);
        r.method = cfg.method;
        r.t_em = out.embed.seconds;
        r.t_me = out.remesh.seconds;
        emit_report(r, cfg.output_dir / "report.json");
        write_csv({r}, cfg.output_dir / "report.csv");
        out.report = r;
    }
    return out;
}

LossCheckResult run_loss_check(const PipelineConfig& cfg) {
    if (cfg.truth.empty() || cfg.pred.empty()) throw InputError("loss-check needs --truth and --pred");
    if (!(cfg.w_lap >= 0)) throw InputError("w_lap must be >= 0");
    if (cfg.loss_variant != "dot" && cfg.loss_variant != "l2" && cfg.loss_variant != "cos")
        throw InputError(fmt::format("unknown loss variant '{}'", cfg.loss_variant));
    const EmbeddedMesh truth = load_hde(cfg.truth);
    const EmbeddedMesh pred = load_hde(cfg.pred);
    LossCheckResult r;
    r.loss = total_loss(pred, truth, cfg.w_lap);
    r.variant = cfg.loss_variant;
    r.variant_value = r.variant == "l2" ? l2_loss(pred, truth) : r.variant == "cos" ? cosine_loss(pred, truth) : r.loss.total;
    return r;
}

} // namespace aniso
