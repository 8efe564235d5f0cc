// Command-line front end: train/eval/finetune on frame tensors, cost-model
// sweeps, the gradient check, and the event-stream converter.

#include <Eigen/Core>
#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tp/checkpoint.hpp"
#include "tp/config.hpp"
#include "tp/container.hpp"
#include "tp/cost.hpp"
#include "tp/dataset.hpp"
#include "tp/errors.hpp"
#include "tp/network.hpp"
#include "tp/oracle.hpp"
#include "tp/trainer.hpp"

namespace {

using tp::Config;
using tp::FrameTensor;
using tp::Index;
using tp::TpNetwork;

// ---------------------------------------------------------------------------
// config -> engine structures

std::vector<std::string> split_list(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(text);
    while (std::getline(is, item, sep)) out.push_back(Config::trim(item));
    return out;
}

Index parse_index(const std::string& text, const std::string& what) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(text, &used);
        if (used != text.size() || v < 0) throw std::invalid_argument(what);
        return static_cast<Index>(v);
    } catch (const std::exception&) {
        throw tp::ConfigError(what + " is not a non-negative integer: " + text);
    }
}

// Layer grammar, comma separated: d<width> dense, r<width> recurrent,
// rd<width> diagonal recurrent, c<in>x<h>x<w>x<out> conv with 3x3 kernels
// and 2x2 max pooling.
std::vector<tp::LayerConfig<double>> parse_arch(const Config& cfg) {
    tp::LifParams<double> lif;
    lif.alpha = cfg.real("alpha", 0.9);
    lif.v_th = cfg.real("v_th", 1.0);
    lif.surrogate_scale = cfg.real("surrogate_scale", 1.0);
    const double beta = cfg.real("beta", 0.9);
    const bool weight_norm = cfg.boolean("weight_norm", false);
    const bool shared_pool = cfg.boolean("pool_shared_indices", false);

    std::vector<tp::LayerConfig<double>> layers;
    for (const std::string& token : split_list(cfg.str("arch", "d64,d64"), ',')) {
        if (token.empty()) throw tp::ConfigError("arch: empty layer token");
        tp::LayerConfig<double> layer;
        layer.lif = lif;
        layer.beta = beta;
        if (token[0] == 'd') {
            layer.kind = tp::LayerKind::Dense;
            layer.width = parse_index(token.substr(1), "arch dense width");
        } else if (token.rfind("rd", 0) == 0) {
            layer.kind = tp::LayerKind::DenseRecurrent;
            layer.recurrent_form = tp::RecurrentForm::Diagonal;
            layer.width = parse_index(token.substr(2), "arch recurrent width");
        } else if (token[0] == 'r') {
            layer.kind = tp::LayerKind::DenseRecurrent;
            layer.recurrent_form = tp::RecurrentForm::Full;
            layer.width = parse_index(token.substr(1), "arch recurrent width");
        } else if (token[0] == 'c') {
            const auto dims = split_list(token.substr(1), 'x');
            if (dims.size() != 4)
                throw tp::ConfigError("arch: conv token needs in x height x width x out: " +
                                      token);
            layer.kind = tp::LayerKind::Conv;
            layer.geom.in_channels = parse_index(dims[0], "conv in_channels");
            layer.geom.height = parse_index(dims[1], "conv height");
            layer.geom.width = parse_index(dims[2], "conv width");
            layer.geom.out_channels = parse_index(dims[3], "conv out_channels");
            layer.weight_norm = weight_norm;
            layer.pool_shared_indices = shared_pool;
        } else {
            throw tp::ConfigError("arch: unknown layer token: " + token);
        }
        layers.push_back(layer);
    }
    return layers;
}

tp::NetConfig<double> parse_net_config(const Config& cfg) {
    tp::NetConfig<double> nc;
    const std::string sim = cfg.str("similarity", "dot");
    if (sim == "dot")
        nc.similarity = tp::Similarity::Dot;
    else if (sim == "neg-euclidean" || sim == "neg_euclidean")
        nc.similarity = tp::Similarity::NegEuclidean;
    else
        throw tp::ConfigError("similarity must be dot or neg-euclidean: " + sim);

    const std::string red = cfg.str("reduction", "mean");
    if (red == "mean")
        nc.reduction = tp::Reduction::Mean;
    else if (red == "sum")
        nc.reduction = tp::Reduction::Sum;
    else
        throw tp::ConfigError("reduction must be mean or sum: " + red);

    const std::string cadence = cfg.str("cadence", "step");
    if (cadence == "step")
        nc.cadence = tp::UpdateCadence::PerStep;
    else if (cadence == "sequence")
        nc.cadence = tp::UpdateCadence::PerSequence;
    else
        throw tp::ConfigError("cadence must be step or sequence: " + cadence);

    nc.learn_target_propagator = cfg.boolean("learn_target_propagator", false);
    nc.learn_recurrent = cfg.boolean("learn_recurrent", true);
    nc.eta = cfg.real("eta", 1e-4);
    nc.readout_eta = cfg.real("readout_eta", 1e-2);
    return nc;
}

tp::SynthParams parse_synth(const Config& cfg) {
    tp::SynthParams p;
    p.num_classes = static_cast<Index>(cfg.integer("classes", p.num_classes));
    p.units = static_cast<Index>(cfg.integer("units", p.units));
    p.steps = static_cast<Index>(cfg.integer("steps", p.steps));
    p.samples_per_class =
        static_cast<Index>(cfg.integer("samples_per_class", p.samples_per_class));
    p.rate_hi = cfg.real("rate_hi", p.rate_hi);
    p.rate_lo = cfg.real("rate_lo", p.rate_lo);
    p.jitter = cfg.real("jitter", p.jitter);
    return p;
}

tp::TemporalOrderParams parse_temporal(const Config& cfg) {
    tp::TemporalOrderParams p;
    p.num_classes = static_cast<Index>(cfg.integer("classes", p.num_classes));
    p.groups = static_cast<Index>(cfg.integer("groups", p.groups));
    p.units_per_group = static_cast<Index>(cfg.integer("units_per_group", p.units_per_group));
    p.steps_per_slot = static_cast<Index>(cfg.integer("steps_per_slot", p.steps_per_slot));
    p.samples_per_class =
        static_cast<Index>(cfg.integer("samples_per_class", p.samples_per_class));
    p.rate_hi = cfg.real("rate_hi", p.rate_hi);
    p.rate_lo = cfg.real("rate_lo", p.rate_lo);
    p.jitter = cfg.real("jitter", p.jitter);
    return p;
}

FrameTensor build_dataset(const Config& cfg) {
    const std::string task = cfg.str("task", "synth");
    const unsigned data_seed = static_cast<unsigned>(cfg.integer("data_seed", 1));
    if (task == "synth") return tp::synth_task(parse_synth(cfg), data_seed);
    if (task == "temporal-order")
        return tp::synth_temporal_order(parse_temporal(cfg), data_seed);
    if (task == "container") return tp::load_container(cfg.require("data"));
    throw tp::ConfigError("task must be synth, temporal-order, or container: " + task);
}

tp::TrainConfig parse_train_config(const Config& cfg, unsigned seed) {
    tp::TrainConfig tc;
    tc.epochs = static_cast<int>(cfg.integer("epochs", tc.epochs));
    tc.batch_size = static_cast<Index>(cfg.integer("batch_size", tc.batch_size));
    tc.eval_every = static_cast<int>(cfg.integer("eval_every", tc.eval_every));
    tc.shuffle = cfg.boolean("shuffle", tc.shuffle);
    tc.seed = seed;
    return tc;
}

void check_finite(const TpNetwork<double>& net) {
    for (const auto& layer : net.layers) {
        if (!layer.w.allFinite() || (layer.r.size() > 0 && !layer.r.allFinite()))
            throw tp::NumericError("non-finite layer weights; lower eta or check the data");
    }
    if (!net.s_proj.allFinite() || !net.readout.allFinite())
        throw tp::NumericError("non-finite projection or readout weights");
}

// ---------------------------------------------------------------------------
// shared CLI state

struct CommonArgs {
    std::string config_path;
    std::string checkpoint_in, checkpoint_out;
    std::string metrics_path;
    long long seed = -1;  // negative: take the config's seed
    bool deterministic = false;
    bool learn_target_propagator = false;

    unsigned resolve_seed(const Config& cfg) const {
        if (seed >= 0) return static_cast<unsigned>(seed);
        return static_cast<unsigned>(cfg.integer("seed", 1));
    }
};

void add_common_flags(CLI::App* cmd, CommonArgs& args, bool with_checkpoints = true) {
    cmd->add_option("--config", args.config_path, "key=value configuration file")
        ->required();
    cmd->add_option("--seed", args.seed, "override the config's seed");
    cmd->add_option("--metrics-out", args.metrics_path, "write a metrics CSV here");
    cmd->add_flag("--deterministic", args.deterministic,
                  "pin execution to one thread (the engine is serial either way)");
    if (with_checkpoints) {
        cmd->add_option("--checkpoint-in", args.checkpoint_in, "load weights before running");
        cmd->add_option("--checkpoint-out", args.checkpoint_out, "save weights afterwards");
        cmd->add_flag("--learn-target-propagator", args.learn_target_propagator,
                      "update the class projection alongside the layers");
    }
}

TpNetwork<double> build_network(const Config& cfg, const CommonArgs& args,
                                const FrameTensor& data) {
    tp::NetConfig<double> nc = parse_net_config(cfg);
    if (args.learn_target_propagator) nc.learn_target_propagator = true;
    TpNetwork<double> net = tp::init_network<double>(data.features, data.num_classes,
                                                     parse_arch(cfg), nc,
                                                     args.resolve_seed(cfg));
    if (!args.checkpoint_in.empty()) tp::load_checkpoint(net, args.checkpoint_in);
    return net;
}

void write_metrics(const std::vector<tp::MetricsRecord>& records, const std::string& path) {
    if (path.empty()) return;
    std::ofstream os(path);
    if (!os) throw tp::ConfigError("cannot open metrics file for writing: " + path);
    tp::write_metrics_csv(records, os);
}

// ---------------------------------------------------------------------------
// subcommands

int run_train(const CommonArgs& args) {
    const Config cfg = Config::from_file(args.config_path);
    const FrameTensor all = build_dataset(cfg);
    FrameTensor train_data, test_data;
    tp::holdout_split(all, static_cast<Index>(cfg.integer("test_every", 5)), train_data,
                      test_data);

    TpNetwork<double> net = build_network(cfg, args, all);
    const tp::TrainConfig tc = parse_train_config(cfg, args.resolve_seed(cfg));

    std::cout << "train: " << train_data.samples() << " train / " << test_data.samples()
              << " test samples, " << all.features << " units, " << all.steps << " steps, "
              << all.num_classes << " classes\n";
    const FrameTensor* test_ptr = test_data.samples() > 0 ? &test_data : nullptr;
    auto records = tp::train(net, train_data, test_ptr, tc, &std::cout);
    check_finite(net);

    double best = 0.0, final_acc = 0.0;
    int best_epoch = 0;
    bool any_test = false;
    for (const auto& r : records) {
        if (r.split != "test") continue;
        any_test = true;
        final_acc = r.accuracy;
        if (r.accuracy > best) {
            best = r.accuracy;
            best_epoch = r.epoch;
        }
    }
    if (any_test)
        std::cout << "best test accuracy " << best << " at epoch " << best_epoch
                  << ", final test accuracy " << final_acc << "\n";

    write_metrics(records, args.metrics_path);
    if (!args.checkpoint_out.empty()) tp::save_checkpoint(net, args.checkpoint_out);
    return 0;
}

int run_eval(const CommonArgs& args, const std::string& split) {
    const Config cfg = Config::from_file(args.config_path);
    if (args.checkpoint_in.empty())
        throw tp::ConfigError("eval needs --checkpoint-in with trained weights");
    FrameTensor data = build_dataset(cfg);
    if (split != "all") {
        FrameTensor train_data, test_data;
        tp::holdout_split(data, static_cast<Index>(cfg.integer("test_every", 5)), train_data,
                          test_data);
        data = split == "train" ? std::move(train_data) : std::move(test_data);
    }

    const TpNetwork<double> net = build_network(cfg, args, data);
    const auto res = tp::evaluate(net, data, static_cast<Index>(cfg.integer("batch_size", 8)));
    check_finite(net);

    std::cout << "samples " << data.samples() << " split " << split << "\n";
    std::cout << "accuracy " << res.accuracy << "\n";
    for (std::size_t l = 0; l < res.layer_loss.size(); ++l)
        std::cout << "layer " << l << ": loss " << res.layer_loss[l] << " silhouette "
                  << res.layer_silhouette[l] << "\n";
    std::cout << "confusion rows (true class -> predicted counts):\n";
    for (Index i = 0; i < res.confusion.rows(); ++i) {
        for (Index j = 0; j < res.confusion.cols(); ++j)
            std::cout << (j ? " " : "") << res.confusion(i, j);
        std::cout << "\n";
    }

    tp::MetricsRecord rec;
    rec.split = "eval:" + split;
    rec.accuracy = res.accuracy;
    rec.layer_loss = res.layer_loss;
    rec.layer_silhouette = res.layer_silhouette;
    write_metrics({rec}, args.metrics_path);
    return 0;
}

int run_finetune(const CommonArgs& args) {
    const Config cfg = Config::from_file(args.config_path);
    if (args.checkpoint_in.empty())
        throw tp::ConfigError("finetune needs --checkpoint-in with pretrained weights");

    const FrameTensor base = build_dataset(cfg);
    FrameTensor base_train, base_test;
    tp::holdout_split(base, static_cast<Index>(cfg.integer("test_every", 5)), base_train,
                      base_test);

    const unsigned shift_seed = static_cast<unsigned>(cfg.integer("shift_seed", 7));
    const FrameTensor shifted =
        tp::apply_user_shift(base, cfg.real("shift_fraction", 0.5), shift_seed);
    const auto split = tp::kshot_split(shifted, static_cast<Index>(cfg.integer("shots", 5)),
                                       cfg.real("support_ratio", 0.5),
                                       static_cast<unsigned>(cfg.integer("split_seed", 11)));

    TpNetwork<double> net = build_network(cfg, args, base);
    tp::TrainConfig tc = parse_train_config(cfg, args.resolve_seed(cfg));
    tc.epochs = static_cast<int>(cfg.integer("tune_epochs", 5));

    const auto report = tp::finetune(net, split, base_test, tc);
    check_finite(net);

    std::ostringstream out;
    out << "support " << split.support.samples() << " query " << split.query.samples()
        << " samples\n";
    out << "query accuracy before " << report.query_before << " after " << report.query_after
        << " (improvement " << report.improvement() << ")\n";
    out << "base accuracy before " << report.base_before << " after " << report.base_after
        << " (forgetting " << report.forgetting() << ")\n";
    std::cout << out.str();

    if (!args.metrics_path.empty()) {
        std::ofstream os(args.metrics_path);
        if (!os) throw tp::ConfigError("cannot open metrics file: " + args.metrics_path);
        os << out.str();
    }
    if (!args.checkpoint_out.empty()) tp::save_checkpoint(net, args.checkpoint_out);
    return 0;
}

int run_cost(const CommonArgs& args, const std::string& sweep_classes,
             const std::string& sweep_batch) {
    const Config cfg = Config::from_file(args.config_path);

    tp::ArchSpec spec;
    spec.batch = static_cast<Index>(cfg.integer("batch_size", 8));
    spec.tess_step = static_cast<Index>(cfg.integer("tess_step", 0));

    const std::string task = cfg.str("task", "synth");
    if (task == "temporal-order") {
        const auto p = parse_temporal(cfg);
        spec.input_width = p.units();
        spec.steps = p.steps();
        spec.classes = p.num_classes;
    } else {
        const auto p = parse_synth(cfg);
        spec.input_width = p.units;
        spec.steps = p.steps;
        spec.classes = p.num_classes;
    }
    spec.input_width = static_cast<Index>(cfg.integer("input_width", spec.input_width));
    spec.steps = static_cast<Index>(cfg.integer("steps", spec.steps));
    spec.classes = static_cast<Index>(cfg.integer("classes", spec.classes));

    Index prev = spec.input_width;
    for (const auto& layer : parse_arch(cfg)) {
        if (layer.kind == tp::LayerKind::Conv) {
            layer.geom.validate();
            if (layer.geom.in_units() != prev)
                throw tp::ConfigError("cost: conv layer does not chain with its input");
            spec.hidden.push_back(layer.geom.conv_units());
            prev = layer.geom.pooled_units();
        } else {
            spec.hidden.push_back(layer.width);
            prev = layer.width;
        }
    }

    std::vector<Index> batches{spec.batch}, classes{spec.classes};
    if (!sweep_batch.empty()) {
        batches.clear();
        for (const auto& tok : split_list(sweep_batch, ','))
            batches.push_back(parse_index(tok, "--sweep-batch entry"));
    }
    if (!sweep_classes.empty()) {
        classes.clear();
        for (const auto& tok : split_list(sweep_classes, ','))
            classes.push_back(parse_index(tok, "--sweep-classes entry"));
    }

    std::ostringstream csv;
    csv << "batch,classes,macs_tp,macs_tess,memory_tp,memory_tess,relative_memory\n";
    for (Index b : batches)
        for (Index o : classes) {
            tp::ArchSpec s = spec;
            s.batch = b;
            s.classes = o;
            csv << b << ',' << o << ',' << tp::macs_tp(s) << ',' << tp::macs_tess(s) << ','
                << tp::memory_tp(s) << ',' << tp::memory_tess(s) << ','
                << tp::relative_memory_cost(b, o) << "\n";
        }

    if (args.metrics_path.empty()) {
        std::cout << csv.str();
    } else {
        std::ofstream os(args.metrics_path);
        if (!os) throw tp::ConfigError("cannot open output file: " + args.metrics_path);
        os << csv.str();
    }
    return 0;
}

int run_gradcheck(const std::string& config_path, int instances, long long seed, double h,
                  const std::string& report_path, const std::string& metrics_path) {
    if (instances < 1) throw tp::ConfigError("gradcheck: need at least one instance");
    if (!(h > 0.0)) throw tp::ConfigError("gradcheck: h must be positive");
    unsigned rng_seed = 1;
    if (seed >= 0)
        rng_seed = static_cast<unsigned>(seed);
    else if (!config_path.empty())
        rng_seed = static_cast<unsigned>(Config::from_file(config_path).integer("seed", 1));

    const auto report = tp::run_gradcheck(instances, rng_seed, 1e-4, h);

    std::ostringstream out;
    out << "gradcheck certifies the single-step locality approximation (traces and spikes "
           "entering the step held fixed), not backpropagation through time\n";
    out << std::scientific << std::setprecision(3);
    for (std::size_t i = 0; i < report.per_instance.size(); ++i)
        out << "instance " << i << " (" << report.labels[i]
            << "): max relative error " << report.per_instance[i] << "\n";
    out << "worst " << report.worst << " over " << report.instances << " instances: "
        << (report.pass ? "PASS" : "FAIL") << " (tol 1.0e-04, h " << h << ")\n";
    std::cout << out.str();

    for (const std::string& path : {report_path, metrics_path}) {
        if (path.empty()) continue;
        std::ofstream os(path);
        if (!os) throw tp::ConfigError("cannot open report file: " + path);
        os << out.str();
    }
    return report.pass ? 0 : 4;
}

// Event text grammar: `units N` once, then per sample a `sample LABEL` line
// followed by `t_us unit` event lines. '#' starts a comment.
int run_convert(const std::string& in_path, const std::string& out_path,
                std::int64_t window_us, Index steps, const std::string& mode_name,
                double clip, long long classes_override, std::int64_t max_duration_us) {
    tp::BinMode mode;
    if (mode_name == "count")
        mode = tp::BinMode::Count;
    else if (mode_name == "binary")
        mode = tp::BinMode::Binary;
    else
        throw tp::ConfigError("convert-events: mode must be count or binary: " + mode_name);
    if (mode == tp::BinMode::Count && !(clip > 0.0))
        throw tp::ConfigError("convert-events: clip must be positive in count mode");

    std::ifstream is(in_path);
    if (!is) throw tp::ConfigError("cannot open events file: " + in_path);

    FrameTensor out;
    out.steps = steps;
    out.num_classes = 0;

    tp::EventStream stream;
    bool in_sample = false;
    Index units = 0;
    auto flush = [&] {
        if (!in_sample) return;
        tp::Matf frame = tp::bin_events(stream, window_us, steps, mode);
        if (mode == tp::BinMode::Count)
            frame = (frame.cwiseMin(static_cast<float>(clip)) / static_cast<float>(clip))
                        .eval();
        out.frames.push_back(std::move(frame));
        stream.events.clear();
    };

    std::string line;
    std::size_t at = 0;
    while (std::getline(is, line)) {
        const std::size_t line_at = at;
        at += line.size() + 1;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = Config::trim(line);
        if (line.empty()) continue;

        std::istringstream ls(line);
        std::string head;
        ls >> head;
        if (head == "units") {
            long long n = 0;
            if (!(ls >> n) || n < 1)
                throw tp::FormatError("events: bad units line", line_at);
            units = static_cast<Index>(n);
            stream.num_units = units;
        } else if (head == "sample") {
            if (units < 1)
                throw tp::FormatError("events: sample before units line", line_at);
            long long label = 0;
            if (!(ls >> label) || label < 0)
                throw tp::FormatError("events: bad sample label", line_at);
            flush();
            in_sample = true;
            out.labels.push_back(static_cast<Index>(label));
            out.num_classes = std::max<Index>(out.num_classes, static_cast<Index>(label) + 1);
        } else {
            if (!in_sample)
                throw tp::FormatError("events: event before any sample line", line_at);
            std::int64_t t_us = 0;
            long long unit = 0;
            try {
                t_us = std::stoll(head);
            } catch (const std::exception&) {
                throw tp::FormatError("events: bad timestamp", line_at);
            }
            if (!(ls >> unit) || unit < 0 || unit >= units)
                throw tp::FormatError("events: bad unit index", line_at);
            int polarity = 1;
            ls >> polarity;
            if (max_duration_us > 0 && t_us >= max_duration_us) continue;
            stream.events.push_back({t_us, static_cast<Index>(unit), polarity});
        }
    }
    flush();
    if (out.frames.empty()) throw tp::FormatError("events: no samples", at);

    out.features = units;
    if (classes_override > 0) {
        if (classes_override < out.num_classes)
            throw tp::ConfigError("convert-events: --classes is below the largest label");
        out.num_classes = static_cast<Index>(classes_override);
    }
    out.validate();
    tp::save_container(out, out_path);
    std::cout << "wrote " << out.samples() << " samples, " << out.steps << " steps, "
              << out.features << " units, " << out.num_classes << " classes to " << out_path
              << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Traces Propagation trainer: forward-only local learning for spiking nets"};
    app.require_subcommand(1);

    CommonArgs train_args, eval_args, tune_args, cost_args;
    std::string eval_split = "all";
    std::string sweep_classes, sweep_batch;

    auto* cmd_train = app.add_subcommand("train", "train a network on the configured task");
    add_common_flags(cmd_train, train_args);

    auto* cmd_eval = app.add_subcommand("eval", "evaluate a checkpoint on the configured task");
    add_common_flags(cmd_eval, eval_args);
    cmd_eval->add_option("--split", eval_split, "all, train, or test")
        ->check(CLI::IsMember({"all", "train", "test"}));

    auto* cmd_tune =
        app.add_subcommand("finetune", "adapt a checkpoint to user-shifted data, k-shot");
    add_common_flags(cmd_tune, tune_args);

    auto* cmd_cost = app.add_subcommand("cost", "analytical MAC and memory cost, CSV");
    add_common_flags(cmd_cost, cost_args, false);
    cmd_cost->add_option("--sweep-classes", sweep_classes, "comma list of class counts");
    cmd_cost->add_option("--sweep-batch", sweep_batch, "comma list of batch sizes");

    int gc_instances = 32;
    long long gc_seed = -1;
    double gc_h = 1e-5;
    std::string gc_config, gc_report, gc_metrics;
    bool gc_deterministic = false;
    auto* cmd_gc =
        app.add_subcommand("gradcheck", "finite-difference check of the layer gradients");
    cmd_gc->set_help_flag("--help", "print help");
    cmd_gc->add_option("--config", gc_config,
                       "optional; only its seed key matters, the check is self-contained");
    cmd_gc->add_option("--instances", gc_instances, "random instances to check");
    cmd_gc->add_option("--seed", gc_seed, "instance generator seed");
    cmd_gc->add_option("--h", gc_h, "central difference step");
    cmd_gc->add_option("--report", gc_report, "write the report here as well");
    cmd_gc->add_option("--metrics-out", gc_metrics, "same as --report");
    cmd_gc->add_flag("--deterministic", gc_deterministic,
                     "pin execution to one thread (the check is serial either way)");

    std::string ev_in, ev_out, ev_mode = "count";
    std::int64_t ev_window = 0, ev_max_duration = 0;
    long long ev_steps = 0, ev_classes = 0;
    double ev_clip = 15.0;
    auto* cmd_ev =
        app.add_subcommand("convert-events", "bin an event-stream text file into a container");
    cmd_ev->add_option("input", ev_in, "event text file")->required();
    cmd_ev->add_option("output", ev_out, "container path to write")->required();
    cmd_ev->add_option("--window-us", ev_window, "bin width in microseconds")->required();
    cmd_ev->add_option("--steps", ev_steps, "time steps per sample")->required();
    cmd_ev->add_option("--mode", ev_mode, "count or binary");
    cmd_ev->add_option("--clip", ev_clip,
                       "count mode: clip counts here, then scale to [0,1]");
    cmd_ev->add_option("--classes", ev_classes, "class count when labels do not cover it");
    cmd_ev->add_option("--max-duration-us", ev_max_duration,
                       "keep only events before this time, 0 keeps the whole recording");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const bool deterministic = train_args.deterministic || eval_args.deterministic ||
                                   tune_args.deterministic || cost_args.deterministic ||
                                   gc_deterministic;
        if (deterministic) Eigen::setNbThreads(1);

        if (cmd_train->parsed()) return run_train(train_args);
        if (cmd_eval->parsed()) return run_eval(eval_args, eval_split);
        if (cmd_tune->parsed()) return run_finetune(tune_args);
        if (cmd_cost->parsed()) return run_cost(cost_args, sweep_classes, sweep_batch);
        if (cmd_gc->parsed())
            return run_gradcheck(gc_config, gc_instances, gc_seed, gc_h, gc_report, gc_metrics);
        if (cmd_ev->parsed())
            return run_convert(ev_in, ev_out, ev_window, static_cast<Index>(ev_steps), ev_mode,
                               ev_clip, ev_classes, ev_max_duration);
        return 2;
    } catch (const tp::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 4;
    } catch (const tp::FormatError& e) {
        std::cerr << "data format error: " << e.what() << "\n";
        return 3;
    } catch (const tp::Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
