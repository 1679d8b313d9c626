#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ifsd/correlation.hpp"
#include "ifsd/coverage_stats.hpp"
#include "ifsd/error.hpp"
#include "ifsd/evalkit.hpp"
#include "ifsd/featurizer.hpp"
#include "ifsd/ingest.hpp"
#include "ifsd/sd_labeling.hpp"
#include "ifsd/synth.hpp"
#include "ifsd/version.hpp"

// File-level pipeline stages. Each stage reads its inputs from disk and
// writes its outputs, so running the stages one by one and running
// `run_pipeline` give the same files.

namespace ifsd {

namespace fs = std::filesystem;

namespace detail {

inline std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return in;
}

inline std::ofstream open_write(const fs::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

inline void close_checked(std::ofstream& out, const fs::path& path) {
    out.close();
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace detail

inline unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

/// Sidecar path for a matrix file: the same name with a ".schema" extension.
inline fs::path schema_path_for(const fs::path& matrix) {
    auto p = matrix;
    p.replace_extension(".schema");
    return p;
}

inline FlowSet load_trace(const fs::path& path) {
    auto in = detail::open_in(path);
    return read_trace(in);
}

inline SynthResult stage_synth(const SynthConfig& cfg, const fs::path& trace, const fs::path& truth) {
    auto result = generate(cfg);
    auto out = detail::open_write(trace);
    write_trace(result.flows, out);
    detail::close_checked(out, trace);
    if (!truth.empty()) {
        auto t = detail::open_write(truth);
        write_truth(result.truth, t);
        detail::close_checked(t, truth);
    }
    return result;
}

inline std::vector<LabeledFlow> stage_label(const fs::path& trace, const fs::path& labels, const SDConfig& sd,
                                            const ONOSplit& split, unsigned threads = 1) {
    const auto flows = load_trace(trace);
    auto labeled = label_flowset(flows, sd, split, threads);
    auto out = detail::open_write(labels);
    write_labels(labeled, out);
    detail::close_checked(out, labels);
    return labeled;
}

inline CorrelationSpace stage_correlate(const fs::path& trace, const fs::path& space_path, const ONOSplit& split,
                                        DurationNs active_timeout, WindowMode mode = WindowMode::from_flow_start,
                                        unsigned threads = 1) {
    const auto flows = load_trace(trace);
    auto space = build_correlation_space(flows, split, active_timeout, mode, threads);
    auto out = detail::open_write(space_path);
    write_space(space, out);
    detail::close_checked(out, space_path);
    return space;
}

/// Labels and space read back together; the split comes from the space file.
struct LoadedSpace {
    std::vector<LabeledFlow> labeled;
    CorrelationSpace space;
};

inline LoadedSpace load_labels_and_space(const fs::path& labels, const fs::path& space_path) {
    auto space_in = detail::open_in(space_path);
    std::string header;
    std::getline(space_in, header);
    const auto params = parse_space_header(header);
    space_in.clear();
    space_in.seekg(0);

    LoadedSpace out;
    auto label_in = detail::open_in(labels);
    out.labeled = read_labels(label_in, params.split);
    FlowSet flows;
    for (const auto& lf : out.labeled) flows.add(lf.flow);
    out.space = read_space(space_in, flows);
    return out;
}

enum class StatsWhich { counts, timeliness, alignment, all };

inline StatsReport stage_stats(const fs::path& labels, const fs::path& space_path, const fs::path& report_dir,
                               StatsWhich which = StatsWhich::all,
                               AlignmentRule rule = AlignmentRule::min_magnitude) {
    const auto loaded = load_labels_and_space(labels, space_path);
    StatsReport report;
    const bool all = which == StatsWhich::all;
    if (all || which == StatsWhich::counts) report.counts = covering_count_stats(loaded.space, loaded.labeled);
    if (all || which == StatsWhich::timeliness)
        report.timeliness = time_to_first_covering(loaded.space, loaded.labeled);
    if (all || which == StatsWhich::alignment)
        report.alignment = best_sd_alignment(loaded.space, loaded.labeled, rule);
    emit_report(report, report_dir);
    return report;
}

inline std::vector<FeatureVector> stage_featurize(const fs::path& labels, const fs::path& space_path,
                                                  const fs::path& matrix, std::size_t k, const SDConfig& sd = {}) {
    const auto loaded = load_labels_and_space(labels, space_path);
    const auto schema = make_schema(loaded.space.split.m, k);
    auto rows = build_matrix(loaded.labeled, loaded.space, schema, sd);
    auto out = detail::open_write(matrix);
    write_feature_matrix(rows, schema, out);
    detail::close_checked(out, matrix);
    const auto sidecar = schema_path_for(matrix);
    auto s = detail::open_write(sidecar);
    write_schema(schema, s);
    detail::close_checked(s, sidecar);
    return rows;
}

struct LoadedMatrix {
    FeatureSchema schema;
    std::vector<FeatureVector> rows;
};

inline LoadedMatrix load_matrix(const fs::path& matrix) {
    LoadedMatrix out;
    auto s = detail::open_in(schema_path_for(matrix));
    out.schema = read_schema(s);
    auto in = detail::open_in(matrix);
    out.rows = read_feature_matrix(in, out.schema);
    return out;
}

inline void save_matrix(const LoadedMatrix& m, const fs::path& path) {
    auto out = detail::open_write(path);
    write_feature_matrix(m.rows, m.schema, out);
    detail::close_checked(out, path);
    const auto sidecar = schema_path_for(path);
    auto s = detail::open_write(sidecar);
    write_schema(m.schema, s);
    detail::close_checked(s, sidecar);
}

inline TrainTest stage_split(const fs::path& matrix, const fs::path& train, const fs::path& test, double fraction,
                             bool balance, std::uint64_t seed) {
    const auto loaded = load_matrix(matrix);
    auto tt = train_test_split(loaded.rows, fraction, balance, seed);
    save_matrix({loaded.schema, tt.train}, train);
    save_matrix({loaded.schema, tt.test}, test);
    return tt;
}

inline LinearModel stage_train(const fs::path& train, const fs::path& model_path, const TrainOptions& opt) {
    const auto loaded = load_matrix(train);
    auto model = train_logistic(Dataset::from_rows(loaded.rows), opt, loaded.schema.columns);
    auto out = detail::open_write(model_path);
    write_model(model, out);
    detail::close_checked(out, model_path);
    return model;
}

struct EvalReport {
    std::size_t rows = 0;
    std::size_t positives = 0;
    ClassMetrics metrics;
    std::vector<GroupImportance> importance;
};

inline void write_metrics(const EvalReport& r, std::ostream& out) {
    using detail::format_double;
    out << "# " << kMetricsFormat << '\n';
    out << "rows=" << r.rows << '\n';
    out << "positives=" << r.positives << '\n';
    out << "auroc=" << format_double(r.metrics.auroc) << '\n';
    out << "balanced_accuracy=" << format_double(r.metrics.balanced_accuracy) << '\n';
    out << "threshold=" << format_double(r.metrics.threshold) << '\n';
    out << "tp=" << r.metrics.confusion.tp << '\n';
    out << "fp=" << r.metrics.confusion.fp << '\n';
    out << "tn=" << r.metrics.confusion.tn << '\n';
    out << "fn=" << r.metrics.confusion.fn << '\n';
    for (std::size_t i = 0; i < r.importance.size(); ++i)
        out << "importance_rank_" << i + 1 << '=' << to_string(r.importance[i].group) << '\n';
    for (const auto& g : r.importance)
        out << "importance_" << to_string(g.group) << '=' << format_double(g.mean_abs_weight) << '\n';
    if (!out) throw IoError("failed writing metrics");
}

inline EvalReport stage_eval(const fs::path& model_path, const fs::path& matrix, const fs::path& metrics_path) {
    auto model_in = detail::open_in(model_path);
    const auto model = read_model(model_in);
    const auto loaded = load_matrix(matrix);
    if (loaded.schema.columns != model.columns) throw SchemaMismatch("model columns differ from the matrix schema");
    const auto data = Dataset::from_rows(loaded.rows);
    const auto scores = model.predict_proba(data);
    EvalReport r;
    r.rows = data.rows;
    r.positives = static_cast<std::size_t>(std::count(data.y.begin(), data.y.end(), 1));
    r.metrics = classification_metrics(scores, data.y);
    r.importance = feature_group_importance(model, model.columns);
    auto out = detail::open_write(metrics_path);
    write_metrics(r, out);
    detail::close_checked(out, metrics_path);
    return r;
}

struct PipelineConfig {
    fs::path out_dir;
    std::string preset = "alignment_lag";
    std::uint64_t seed = 7;
    ONOSplit split{10};
    std::size_t k = kDefaultCoveringSlots;
    DurationNs active_timeout = kDefaultActiveTimeout;
    WindowMode mode = WindowMode::from_flow_start;
    SDConfig sd;
    AlignmentRule rule = AlignmentRule::min_magnitude;
    double split_fraction = 0.5;
    bool balance = true;
    TrainOptions train;
    unsigned threads = 1;
};

/// Artifact names inside a pipeline output directory.
struct PipelinePaths {
    fs::path trace, truth, labels, space, stats, matrix, train, test, model, metrics;

    explicit PipelinePaths(const fs::path& dir)
        : trace(dir / "trace.txt"),
          truth(dir / "truth.csv"),
          labels(dir / "labels.txt"),
          space(dir / "space.csv"),
          stats(dir / "stats"),
          matrix(dir / "matrix.csv"),
          train(dir / "train.csv"),
          test(dir / "test.csv"),
          model(dir / "model.txt"),
          metrics(dir / "metrics.txt") {}
};

/// synth -> label -> correlate -> stats -> featurize -> split -> train -> eval.
inline EvalReport run_pipeline(const PipelineConfig& cfg) {
    const PipelinePaths p(cfg.out_dir);
    auto synth_cfg = scenario_presets(cfg.preset);
    synth_cfg.seed = cfg.seed;
    stage_synth(synth_cfg, p.trace, p.truth);
    stage_label(p.trace, p.labels, cfg.sd, cfg.split, cfg.threads);
    stage_correlate(p.trace, p.space, cfg.split, cfg.active_timeout, cfg.mode, cfg.threads);
    stage_stats(p.labels, p.space, p.stats, StatsWhich::all, cfg.rule);
    stage_featurize(p.labels, p.space, p.matrix, cfg.k, cfg.sd);
    stage_split(p.matrix, p.train, p.test, cfg.split_fraction, cfg.balance, cfg.seed);
    auto train = cfg.train;
    train.seed = cfg.seed;
    stage_train(p.train, p.model, train);
    return stage_eval(p.model, p.test, p.metrics);
}

}  // namespace ifsd
