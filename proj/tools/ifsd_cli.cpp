// ifsd: command-line front end for the inter-flow SD pipeline.
//
// Exit status: 0 success, 1 stage failure, 2 usage error.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <map>
#include <string>

#include "ifsd/pipeline.hpp"
#include "ifsd/version.hpp"

namespace {

using namespace ifsd;

const std::map<std::string, SDMethod> kMethods{
    {"robust_z", SDMethod::robust_z}, {"iqr", SDMethod::iqr}, {"union", SDMethod::union_of_both}};
const std::map<std::string, ChannelSelect> kChannels{
    {"delay", ChannelSelect::delay}, {"jitter", ChannelSelect::jitter}, {"either", ChannelSelect::either}};
const std::map<std::string, WindowMode> kWindowModes{
    {"from_flow_start", WindowMode::from_flow_start}, {"literal_bound", WindowMode::literal_bound}};
const std::map<std::string, StatsWhich> kWhich{{"counts", StatsWhich::counts},
                                               {"timeliness", StatsWhich::timeliness},
                                               {"alignment", StatsWhich::alignment},
                                               {"all", StatsWhich::all}};
const std::map<std::string, AlignmentRule> kRules{{"min_magnitude", AlignmentRule::min_magnitude},
                                                  {"signed_minimum", AlignmentRule::signed_minimum}};

struct SdFlags {
    std::string method = "robust_z";
    std::string channel = "delay";
    SDConfig cfg;

    void add(CLI::App* app) {
        app->add_option("--method", method, "SD rule")->transform(CLI::IsMember(kMethods));
        app->add_option("--z-threshold", cfg.z_threshold, "modified Z-score threshold");
        app->add_option("--iqr-multiplier", cfg.iqr_multiplier, "Tukey fence multiplier");
        app->add_option("--min-run", cfg.min_run, "minimum consecutive flagged samples");
        app->add_option("--channel", channel, "series to label")->transform(CLI::IsMember(kChannels));
    }

    SDConfig resolve() const {
        SDConfig c = cfg;
        c.method = kMethods.at(method);
        c.channel = kChannels.at(channel);
        c.validate();
        return c;
    }
};

void print_version() {
    std::cout << "ifsd " << kVersion << '\n'
              << kSpaceFormat << '\n'
              << kSchemaFormat << '\n'
              << kModelMagic << '\n'
              << kMetricsFormat << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Inter-flow service degradation analysis"};
    app.require_subcommand(1);
    app.fallthrough();
    bool version = false;
    app.add_flag("--version", version, "print version and format identifiers");
    unsigned threads = default_threads();
    app.add_option("--threads", threads, "worker cap for parallel stages")->check(CLI::PositiveNumber);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic trace");
    std::string preset = "alignment_lag";
    std::uint64_t seed = 7;
    std::string trace_out, truth_out;
    double lead_s = kDefaultAlignmentLeadS;
    synth->add_option("--preset", preset, "scenario preset")->check(CLI::IsMember(preset_names()));
    synth->add_option("--seed", seed, "generator seed");
    synth->add_option("--out", trace_out, "trace file")->required();
    synth->add_option("--truth", truth_out, "ground-truth CSV");
    synth->add_option("--lead", lead_s, "covering-SD lead in seconds (alignment_lag)");

    // label
    auto* label = app.add_subcommand("label", "detect SD events per flow");
    std::string trace_in, labels_path;
    std::size_t m = 10;
    SdFlags label_sd;
    label->add_option("--trace", trace_in, "input trace")->required();
    label->add_option("--out", labels_path, "labeled trace")->required();
    label->add_option("--m", m, "O/NO split")->check(CLI::PositiveNumber);
    label_sd.add(label);

    // correlate
    auto* correlate = app.add_subcommand("correlate", "build the correlation space");
    std::string space_path;
    double active_timeout_s = 300;
    std::string window = "from_flow_start";
    correlate->add_option("--trace", trace_in, "input trace")->required();
    correlate->add_option("--out", space_path, "space file")->required();
    correlate->add_option("--m", m, "O/NO split")->check(CLI::PositiveNumber);
    correlate->add_option("--active-timeout", active_timeout_s, "active timeout in seconds")->check(CLI::PositiveNumber);
    correlate->add_option("--window", window, "window anchoring")->transform(CLI::IsMember(kWindowModes));

    // stats
    auto* stats = app.add_subcommand("stats", "coverage statistics");
    std::string report_dir, which = "all", rule = "min_magnitude";
    stats->add_option("--labels", labels_path, "labeled trace")->required();
    stats->add_option("--space", space_path, "space file")->required();
    stats->add_option("--out", report_dir, "report directory")->required();
    stats->add_option("--which", which, "counts|timeliness|alignment|all")->transform(CLI::IsMember(kWhich));
    stats->add_option("--alignment-rule", rule, "best-pair rule")->transform(CLI::IsMember(kRules));

    // featurize
    auto* featurize = app.add_subcommand("featurize", "build the feature matrix");
    std::string matrix_path;
    std::size_t k = kDefaultCoveringSlots;
    std::size_t featurize_m = 0;
    SdFlags feat_sd;
    featurize->add_option("--labels", labels_path, "labeled trace")->required();
    featurize->add_option("--space", space_path, "space file")->required();
    featurize->add_option("--out", matrix_path, "matrix CSV (schema sidecar written next to it)")->required();
    featurize->add_option("--k", k, "covering slots")->check(CLI::PositiveNumber);
    featurize->add_option("--m", featurize_m, "expected O/NO split (must match the space file)");
    feat_sd.add(featurize);

    // split
    auto* split = app.add_subcommand("split", "seeded train/test split");
    std::string train_path, test_path;
    double fraction = 0.5;
    bool no_balance = false;
    split->add_option("--matrix", matrix_path, "input matrix")->required();
    split->add_option("--train", train_path, "train matrix")->required();
    split->add_option("--test", test_path, "test matrix")->required();
    split->add_option("--fraction", fraction, "train fraction per class");
    split->add_flag("--no-balance", no_balance, "keep the class imbalance");
    split->add_option("--seed", seed, "split seed");

    // train
    auto* train = app.add_subcommand("train", "fit the logistic baseline");
    std::string model_path;
    TrainOptions opt;
    train->add_option("--matrix", matrix_path, "training matrix")->required();
    train->add_option("--out", model_path, "model file")->required();
    train->add_option("--lambda", opt.l2_lambda, "L2 strength");
    train->add_option("--max-iter", opt.max_iter, "iteration cap");
    train->add_option("--tol", opt.tol, "objective change tolerance");
    train->add_option("--seed", opt.seed, "initialization seed");

    // eval
    auto* eval = app.add_subcommand("eval", "score a matrix with a trained model");
    std::string metrics_path;
    eval->add_option("--model", model_path, "model file")->required();
    eval->add_option("--matrix", matrix_path, "matrix to score")->required();
    eval->add_option("--out", metrics_path, "metrics report")->required();

    // pipeline
    auto* pipeline = app.add_subcommand("pipeline", "run every stage with one seed");
    std::string out_dir;
    SdFlags pipe_sd;
    pipeline->add_option("--preset", preset, "scenario preset")->check(CLI::IsMember(preset_names()));
    pipeline->add_option("--seed", seed, "seed for every stage");
    pipeline->add_option("--out", out_dir, "artifact directory")->required();
    pipeline->add_option("--m", m, "O/NO split")->check(CLI::PositiveNumber);
    pipeline->add_option("--k", k, "covering slots")->check(CLI::PositiveNumber);
    pipeline->add_option("--active-timeout", active_timeout_s, "active timeout in seconds")->check(CLI::PositiveNumber);
    pipeline->add_option("--window", window, "window anchoring")->transform(CLI::IsMember(kWindowModes));
    pipeline->add_option("--alignment-rule", rule, "best-pair rule")->transform(CLI::IsMember(kRules));
    pipeline->add_option("--fraction", fraction, "train fraction per class");
    pipe_sd.add(pipeline);

    if (argc >= 2 && std::string(argv[1]) == "--version") {
        print_version();
        return 0;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (*synth) {
            auto cfg = preset == "alignment_lag" ? alignment_lag_preset(lead_s) : scenario_presets(preset);
            cfg.seed = seed;
            auto r = stage_synth(cfg, trace_out, truth_out);
            std::cerr << "synth: " << r.flows.size() << " flows -> " << trace_out << '\n';
        } else if (*label) {
            auto labeled = stage_label(trace_in, labels_path, label_sd.resolve(), ONOSplit(m), threads);
            std::size_t events = 0, annotated = 0;
            for (const auto& lf : labeled) {
                events += lf.events.size();
                annotated += lf.annotations.empty() ? 0 : 1;
            }
            std::cerr << "label: " << labeled.size() << " flows, " << events << " events, " << annotated
                      << " flows with detection notes\n";
        } else if (*correlate) {
            auto space = stage_correlate(trace_in, space_path, ONOSplit(m), seconds(active_timeout_s),
                                         kWindowModes.at(window), threads);
            std::cerr << "correlate: " << space.entries.size() << " targets, " << space.pair_count() << " pairs\n";
        } else if (*stats) {
            stage_stats(labels_path, space_path, report_dir, kWhich.at(which), kRules.at(rule));
            std::cerr << "stats: report in " << report_dir << '\n';
        } else if (*featurize) {
            if (featurize_m) {
                auto in = detail::open_in(space_path);
                std::string header;
                std::getline(in, header);
                if (parse_space_header(header).split.m != featurize_m)
                    throw ConfigError("--m " + std::to_string(featurize_m) + " does not match the space file");
            }
            auto rows = stage_featurize(labels_path, space_path, matrix_path, k, feat_sd.resolve());
            std::cerr << "featurize: " << rows.size() << " rows -> " << matrix_path << '\n';
        } else if (*split) {
            auto tt = stage_split(matrix_path, train_path, test_path, fraction, !no_balance, seed);
            std::cerr << "split: " << tt.train.size() << " train, " << tt.test.size() << " test\n";
        } else if (*train) {
            stage_train(matrix_path, model_path, opt);
            std::cerr << "train: model -> " << model_path << '\n';
        } else if (*eval) {
            auto r = stage_eval(model_path, matrix_path, metrics_path);
            std::cerr << "eval: auroc " << r.metrics.auroc << ", balanced accuracy " << r.metrics.balanced_accuracy
                      << '\n';
        } else if (*pipeline) {
            PipelineConfig cfg;
            cfg.out_dir = out_dir;
            cfg.preset = preset;
            cfg.seed = seed;
            cfg.split = ONOSplit(m);
            cfg.k = k;
            cfg.active_timeout = seconds(active_timeout_s);
            cfg.mode = kWindowModes.at(window);
            cfg.rule = kRules.at(rule);
            cfg.sd = pipe_sd.resolve();
            cfg.split_fraction = fraction;
            cfg.threads = threads;
            auto r = run_pipeline(cfg);
            std::cerr << "pipeline: auroc " << r.metrics.auroc << ", balanced accuracy "
                      << r.metrics.balanced_accuracy << " (artifacts in " << out_dir << ")\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
