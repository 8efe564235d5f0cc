#pragma once

#include <algorithm>
#include <chrono>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "tp/dataset.hpp"
#include "tp/network.hpp"
#include "tp/silhouette.hpp"
#include "tp/tensor.hpp"

namespace tp {

struct TrainConfig {
    int epochs = 10;
    Index batch_size = 8;
    int eval_every = 1;
    unsigned seed = 1;
    bool shuffle = true;

    void validate() const {
        if (epochs < 0) throw ConfigError("trainer: epochs must be non-negative");
        if (batch_size < 2)
            throw ContrastiveBatchError("trainer: batch size must be at least 2");
        if (eval_every < 1) throw ConfigError("trainer: eval cadence must be at least 1");
    }
};

struct MetricsRecord {
    int epoch = 0;
    std::string split;
    double accuracy = 0.0;
    std::vector<double> layer_loss;
    std::vector<double> layer_silhouette;
    std::int64_t wall_ms = 0;
};

inline std::string metrics_line(const MetricsRecord& r) {
    std::string out = "epoch=" + std::to_string(r.epoch) + " split=" + r.split +
                      " accuracy=" + std::to_string(r.accuracy);
    for (std::size_t l = 0; l < r.layer_loss.size(); ++l)
        out += " loss_l" + std::to_string(l) + "=" + std::to_string(r.layer_loss[l]);
    for (std::size_t l = 0; l < r.layer_silhouette.size(); ++l)
        out += " silhouette_l" + std::to_string(l) + "=" +
               std::to_string(r.layer_silhouette[l]);
    out += " wall_ms=" + std::to_string(r.wall_ms);
    return out;
}

inline void write_metrics_csv(const std::vector<MetricsRecord>& records, std::ostream& os) {
    std::size_t layers = 0;
    for (const auto& r : records) layers = std::max(layers, r.layer_loss.size());
    os << "epoch,split,accuracy";
    for (std::size_t l = 0; l < layers; ++l) os << ",loss_l" << l;
    for (std::size_t l = 0; l < layers; ++l) os << ",silhouette_l" << l;
    os << ",wall_ms\n";
    for (const auto& r : records) {
        os << r.epoch << ',' << r.split << ',' << r.accuracy;
        for (std::size_t l = 0; l < layers; ++l)
            os << ',' << (l < r.layer_loss.size() ? std::to_string(r.layer_loss[l]) : "");
        for (std::size_t l = 0; l < layers; ++l)
            os << ','
               << (l < r.layer_silhouette.size() ? std::to_string(r.layer_silhouette[l]) : "");
        os << ',' << r.wall_ms << '\n';
    }
}

template <typename S>
Mat<S> one_hot(const std::vector<Index>& labels, Index classes) {
    Mat<S> out = Mat<S>::Zero(static_cast<Index>(labels.size()), classes);
    for (Index b = 0; b < out.rows(); ++b) {
        if (labels[b] < 0 || labels[b] >= classes)
            throw DimensionError("one_hot: label out of range");
        out(b, labels[b]) = S(1);
    }
    return out;
}

namespace detail {

template <typename S>
Mat<S> frame_rows(const FrameTensor& data, const std::vector<Index>& idx, Index t) {
    Mat<S> x(static_cast<Index>(idx.size()), data.features);
    for (std::size_t k = 0; k < idx.size(); ++k)
        x.row(static_cast<Index>(k)) = data.frames[idx[k]].row(t).cast<S>();
    return x;
}

template <typename S>
void check_compatible(const TpNetwork<S>& net, const FrameTensor& data, const char* what) {
    data.validate();
    if (data.features != net.input_width)
        throw DimensionError(std::string(what) + ": feature width does not match the network");
    if (data.num_classes != net.classes)
        throw DimensionError(std::string(what) + ": class count does not match the network");
}

}  // namespace detail

struct EvalResult {
    double accuracy = 0.0;
    Matd confusion;  // [true class, predicted class]
    std::vector<double> layer_loss;        // mean local loss, batches of >= 2 only
    std::vector<double> layer_silhouette;  // on final-step input traces
};

/// Full forward pass over a dataset without touching any weight. Labels drive
/// only the target path, whose activity feeds metrics, never predictions.
template <typename S>
EvalResult evaluate(const TpNetwork<S>& net, const FrameTensor& data, Index batch_size = 32) {
    detail::check_compatible(net, data, "evaluate");
    if (data.samples() == 0) throw ConfigError("evaluate: empty dataset");
    if (batch_size < 1) throw ConfigError("evaluate: batch size must be positive");

    EvalResult result;
    result.confusion = Matd::Zero(net.classes, net.classes);
    result.layer_loss.assign(net.depth(), 0.0);
    std::vector<Matd> final_traces(net.depth());
    for (Index l = 0; l < net.depth(); ++l)
        final_traces[l] = Matd(data.samples(), net.layers[l].units);

    Index hits = 0;
    std::int64_t loss_batches = 0;
    std::vector<Index> idx;
    for (Index start = 0; start < data.samples(); start += batch_size) {
        const Index size = std::min<Index>(batch_size, data.samples() - start);
        idx.resize(size);
        for (Index k = 0; k < size; ++k) idx[k] = start + k;
        const Index batch = size;

        std::vector<Index> batch_labels(batch);
        for (Index k = 0; k < batch; ++k) batch_labels[k] = data.labels[idx[k]];
        const Mat<S> labels = one_hot<S>(batch_labels, net.classes);

        auto states = init_states(net, batch);
        LabelTrace<S> label_trace{net.layers.front().config.beta};
        auto readout = ReadoutState<S>::zero(batch, net.layers.back().out_width, net.classes);

        for (Index t = 0; t < data.steps; ++t) {
            const Mat<S> x = detail::frame_rows<S>(data, idx, t);
            StepResult<S> out = forward_step(net, states, x, labels);
            label_trace.step();
            readout_step(readout, out.out_in, net.readout);
            if (batch >= 2) {
                for (Index l = 0; l < net.depth(); ++l) {
                    const Mat<S> prev_trg =
                        l == 0 ? label_trace.materialize(labels)
                               : Mat<S>(states[l - 1].trace.eps_trg);
                    const Mat<S> y = pairwise_targets(prev_trg, net.config.similarity);
                    const Mat<S> z =
                        pairwise_logits(states[l].trace.eps, states[l].trace.eps_trg);
                    result.layer_loss[l] += double(local_loss(z, y, net.config.reduction));
                }
            }
        }
        if (batch >= 2) ++loss_batches;

        require_finite(readout.acc, "evaluate readout");
        const std::vector<Index> pred = predict(readout);
        for (Index k = 0; k < batch; ++k) {
            result.confusion(batch_labels[k], pred[k]) += 1.0;
            hits += pred[k] == batch_labels[k];
        }
        for (Index l = 0; l < net.depth(); ++l)
            for (Index k = 0; k < batch; ++k)
                final_traces[l].row(start + k) = states[l].trace.eps.row(k).template cast<double>();
    }

    result.accuracy = double(hits) / double(data.samples());
    for (Index l = 0; l < net.depth(); ++l)
        result.layer_loss[l] =
            loss_batches ? result.layer_loss[l] / double(loss_batches * data.steps) : 0.0;
    std::vector<Index> members(net.classes, 0);
    for (Index lab : data.labels) ++members[lab];
    const bool scorable =
        std::any_of(members.begin(), members.end(), [](Index m) { return m >= 2; });
    result.layer_silhouette.resize(net.depth());
    for (Index l = 0; l < net.depth(); ++l)
        result.layer_silhouette[l] =
            scorable ? silhouette(final_traces[l], data.labels)
                     : std::numeric_limits<double>::quiet_NaN();
    return result;
}

/// Per-layer final-step input traces over a whole dataset, one
/// [samples, units] matrix per layer. The clustering metrics read these.
template <typename S>
std::vector<Matd> collect_final_traces(const TpNetwork<S>& net, const FrameTensor& data,
                                       Index batch_size = 32) {
    detail::check_compatible(net, data, "collect_final_traces");
    std::vector<Matd> traces(net.depth());
    for (Index l = 0; l < net.depth(); ++l)
        traces[l] = Matd(data.samples(), net.layers[l].units);

    std::vector<Index> idx;
    for (Index start = 0; start < data.samples(); start += batch_size) {
        const Index size = std::min<Index>(batch_size, data.samples() - start);
        idx.resize(size);
        for (Index k = 0; k < size; ++k) idx[k] = start + k;
        std::vector<Index> batch_labels(size);
        for (Index k = 0; k < size; ++k) batch_labels[k] = data.labels[idx[k]];
        const Mat<S> labels = one_hot<S>(batch_labels, net.classes);

        auto states = init_states(net, size);
        for (Index t = 0; t < data.steps; ++t)
            forward_step(net, states, detail::frame_rows<S>(data, idx, t), labels);
        for (Index l = 0; l < net.depth(); ++l)
            for (Index k = 0; k < size; ++k)
                traces[l].row(start + k) = states[l].trace.eps.row(k).template cast<double>();
    }
    return traces;
}

/// Algorithm 1 over a dataset: serial batches, per-step layer updates inside
/// train_step, readout delta rule at each sequence end. Returns one metrics
/// record per split per evaluation epoch; wall clock is strictly increasing
/// across records.
template <typename S>
std::vector<MetricsRecord> train(TpNetwork<S>& net, const FrameTensor& train_data,
                                 const FrameTensor* test_data, const TrainConfig& cfg,
                                 std::ostream* live = nullptr) {
    cfg.validate();
    detail::check_compatible(net, train_data, "train");
    if (test_data) detail::check_compatible(net, *test_data, "train(test split)");

    const auto start_time = std::chrono::steady_clock::now();
    std::int64_t last_wall = 0;
    auto stamp = [&]() {
        std::int64_t ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                              std::chrono::steady_clock::now() - start_time)
                              .count();
        if (ms <= last_wall) ms = last_wall + 1;
        last_wall = ms;
        return ms;
    };

    std::vector<MetricsRecord> records;
    Rng order_rng(cfg.seed);
    std::vector<Index> order(train_data.samples());
    std::iota(order.begin(), order.end(), Index(0));

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (cfg.shuffle) std::shuffle(order.begin(), order.end(), order_rng);

        std::vector<double> epoch_loss(net.depth(), 0.0);
        std::int64_t loss_steps = 0;
        std::vector<Index> idx;
        for (Index start = 0; start < train_data.samples(); start += cfg.batch_size) {
            const Index size = std::min<Index>(cfg.batch_size, train_data.samples() - start);
            if (size < 2) break;  // a trailing singleton cannot form contrastive pairs
            idx.assign(order.begin() + start, order.begin() + start + size);

            std::vector<Index> batch_labels(size);
            for (Index k = 0; k < size; ++k) batch_labels[k] = train_data.labels[idx[k]];
            const Mat<S> labels = one_hot<S>(batch_labels, net.classes);

            auto states = init_states(net, size);
            LabelTrace<S> label_trace{net.layers.front().config.beta};
            auto readout =
                ReadoutState<S>::zero(size, net.layers.back().out_width, net.classes);
            GradAccum<S> accum;
            GradAccum<S>* accum_ptr =
                net.config.cadence == UpdateCadence::PerSequence ? &accum : nullptr;

            for (Index t = 0; t < train_data.steps; ++t) {
                const Mat<S> x = detail::frame_rows<S>(train_data, idx, t);
                TrainStepResult<S> step =
                    train_step(net, states, label_trace, x, labels, accum_ptr);
                readout_step(readout, step.out_in, net.readout);
                for (Index l = 0; l < net.depth(); ++l)
                    epoch_loss[l] += double(step.layer_loss[l]);
                ++loss_steps;
            }
            if (accum_ptr) apply_accumulated(net, accum);
            train_readout(net, readout, labels);
        }

        if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
            EvalResult on_train = evaluate(net, train_data, cfg.batch_size);
            MetricsRecord rec;
            rec.epoch = epoch;
            rec.split = "train";
            rec.accuracy = on_train.accuracy;
            rec.layer_loss.resize(net.depth());
            for (Index l = 0; l < net.depth(); ++l)
                rec.layer_loss[l] = loss_steps ? epoch_loss[l] / double(loss_steps) : 0.0;
            rec.layer_silhouette = on_train.layer_silhouette;
            rec.wall_ms = stamp();
            if (live) *live << metrics_line(rec) << '\n';
            records.push_back(std::move(rec));

            if (test_data) {
                EvalResult on_test = evaluate(net, *test_data, cfg.batch_size);
                MetricsRecord trec;
                trec.epoch = epoch;
                trec.split = "test";
                trec.accuracy = on_test.accuracy;
                trec.layer_loss = on_test.layer_loss;
                trec.layer_silhouette = on_test.layer_silhouette;
                trec.wall_ms = stamp();
                if (live) *live << metrics_line(trec) << '\n';
                records.push_back(std::move(trec));
            }
        }
    }
    return records;
}

struct FinetuneReport {
    double query_before = 0.0, query_after = 0.0;
    double base_before = 0.0, base_after = 0.0;

    double improvement() const { return query_after - query_before; }
    double forgetting() const { return base_before - base_after; }
};

/// Adapts a pretrained network on the support set only, reporting query
/// accuracy before and after plus the accuracy drop on the original data.
template <typename S>
FinetuneReport finetune(TpNetwork<S>& net, const KShotSplit& split, const FrameTensor& base,
                        const TrainConfig& cfg) {
    detail::check_compatible(net, split.support, "finetune(support)");
    detail::check_compatible(net, split.query, "finetune(query)");
    if (split.support.samples() < 2)
        throw ContrastiveBatchError("finetune: support set needs at least 2 samples");

    FinetuneReport report;
    report.query_before = evaluate(net, split.query, cfg.batch_size).accuracy;
    report.base_before = evaluate(net, base, cfg.batch_size).accuracy;

    TrainConfig tune = cfg;
    tune.batch_size = std::min<Index>(cfg.batch_size, split.support.samples());
    train(net, split.support, nullptr, tune);

    report.query_after = evaluate(net, split.query, cfg.batch_size).accuracy;
    report.base_after = evaluate(net, base, cfg.batch_size).accuracy;
    return report;
}

}  // namespace tp
