#pragma once

#include <cmath>
#include <vector>

#include "tp/conv.hpp"
#include "tp/lif.hpp"
#include "tp/loss.hpp"
#include "tp/rule.hpp"
#include "tp/tensor.hpp"
#include "tp/traces.hpp"

namespace tp {

enum class LayerKind { Dense, DenseRecurrent, Conv };
enum class RecurrentForm { Full, Diagonal };
enum class UpdateCadence { PerStep, PerSequence };

/// Effective weights under weight normalization: each fan-in column is scaled
/// to norm gain[j], direction unchanged. Columns with vanishing norm are
/// guarded at 1e-12.
template <typename S>
Mat<S> weight_normalize(const Mat<S>& w, const Vec<S>& gain) {
    if (gain.size() != w.cols()) throw DimensionError("weight_normalize: one gain per column");
    Mat<S> out = w;
    for (Index j = 0; j < w.cols(); ++j) {
        if (!(gain(j) > S(0))) throw ConfigError("weight_normalize: gains must be positive");
        out.col(j) *= gain(j) / std::max(w.col(j).norm(), S(1e-12));
    }
    return out;
}

template <typename S>
struct LayerConfig {
    LayerKind kind = LayerKind::Dense;
    Index width = 0;   // dense output units; conv layers size themselves from geom
    ConvGeom geom;     // conv only
    LifParams<S> lif;
    S beta = S(0.9);
    RecurrentForm recurrent_form = RecurrentForm::Full;
    bool weight_norm = false;          // normalize input currents (conv stacks)
    bool pool_shared_indices = false;  // target path pools at the input path's argmax
};

template <typename S>
struct Layer {
    LayerConfig<S> config;
    Index fan_in = 0;     // presynaptic features per output unit
    Index units = 0;      // membrane/trace width
    Index out_width = 0;  // width the next layer consumes (pooled for conv)
    Mat<S> w;             // dense [fan_in, units]; conv kernels [patch_size, out_channels]
    Mat<S> r;             // [units, units] full, [1, units] diagonal, empty otherwise
    Vec<S> gain;          // weight-norm gains, fixed at 1

    bool recurrent() const { return config.kind == LayerKind::DenseRecurrent; }
    bool conv() const { return config.kind == LayerKind::Conv; }
    Mat<S> effective_w() const { return config.weight_norm ? weight_normalize(w, gain) : w; }
};

template <typename S>
struct NetConfig {
    Similarity similarity = Similarity::Dot;
    Reduction reduction = Reduction::Mean;
    UpdateCadence cadence = UpdateCadence::PerStep;
    bool learn_target_propagator = false;  // update S alongside the layers
    bool learn_recurrent = true;
    S eta = S(1e-4);
    S readout_eta = S(1e-2);
};

template <typename S>
struct TpNetwork {
    Index input_width = 0;
    Index classes = 0;
    NetConfig<S> config;
    std::vector<Layer<S>> layers;
    Mat<S> s_proj;   // target propagator [classes, first-layer units]
    Mat<S> readout;  // integrator weights [last out_width, classes]

    Index depth() const { return static_cast<Index>(layers.size()); }
};

/// Uniform init in +-sqrt(1/fan_in), every tensor drawn in a fixed order from
/// one generator, so a seed pins the whole network.
template <typename S>
TpNetwork<S> init_network(Index input_width, Index classes,
                          const std::vector<LayerConfig<S>>& configs,
                          const NetConfig<S>& net_config, unsigned seed) {
    if (input_width < 1) throw ConfigError("network: input width must be positive");
    if (classes < 2) throw ConfigError("network: need at least two classes");
    if (configs.empty()) throw ConfigError("network: need at least one layer");
    if (!(net_config.eta > S(0)) || !(net_config.readout_eta > S(0)))
        throw ConfigError("network: learning rates must be positive");

    TpNetwork<S> net;
    net.input_width = input_width;
    net.classes = classes;
    net.config = net_config;

    Rng rng(seed);
    Index prev = input_width;
    for (const auto& cfg : configs) {
        cfg.lif.validate();
        if (!(cfg.beta >= S(0) && cfg.beta < S(1)))
            throw ConfigError("network: beta must be in [0,1)");
        Layer<S> layer;
        layer.config = cfg;
        if (cfg.kind == LayerKind::Conv) {
            cfg.geom.validate();
            if (cfg.geom.in_units() != prev)
                throw ConfigError("network: conv input does not chain with previous layer");
            layer.fan_in = cfg.geom.patch_size();
            layer.units = cfg.geom.conv_units();
            layer.out_width = cfg.geom.pooled_units();
            layer.w = uniform_matrix<S>(rng, layer.fan_in, cfg.geom.out_channels,
                                        -std::sqrt(S(1) / S(layer.fan_in)),
                                        std::sqrt(S(1) / S(layer.fan_in)));
            layer.gain = Vec<S>::Ones(cfg.geom.out_channels);
        } else {
            if (cfg.width < 1) throw ConfigError("network: dense layer width must be positive");
            layer.fan_in = prev;
            layer.units = cfg.width;
            layer.out_width = cfg.width;
            const S bound = std::sqrt(S(1) / S(layer.fan_in));
            layer.w = uniform_matrix<S>(rng, layer.fan_in, layer.units, -bound, bound);
            layer.gain = Vec<S>::Ones(layer.units);
            if (cfg.kind == LayerKind::DenseRecurrent) {
                const S rbound = std::sqrt(S(1) / S(layer.units));
                if (cfg.recurrent_form == RecurrentForm::Full)
                    layer.r = uniform_matrix<S>(rng, layer.units, layer.units, -rbound, rbound);
                else
                    layer.r = uniform_matrix<S>(rng, 1, layer.units, -rbound, rbound);
            }
        }
        prev = layer.out_width;
        net.layers.push_back(std::move(layer));
    }

    const S sbound = std::sqrt(S(1) / S(classes));
    net.s_proj = uniform_matrix<S>(rng, classes, net.layers.front().units, -sbound, sbound);
    const S robound = std::sqrt(S(1) / S(prev));
    net.readout = uniform_matrix<S>(rng, prev, classes, -robound, robound);
    return net;
}

template <typename S>
struct LayerState {
    MembraneState<S> in, trg;
    TraceState<S> trace;
};

template <typename S>
std::vector<LayerState<S>> init_states(const TpNetwork<S>& net, Index batch) {
    std::vector<LayerState<S>> states;
    states.reserve(net.layers.size());
    for (const auto& layer : net.layers)
        states.push_back({MembraneState<S>::zero(batch, layer.units),
                          MembraneState<S>::zero(batch, layer.units),
                          TraceState<S>::zero(batch, layer.units, layer.config.beta)});
    return states;
}

/// The label trace: the target path's layer-0 trace is beta-filtered constant
/// one-hot drive, so it stays a scalar gain applied to the labels instead of
/// an allocated [batch, classes] tensor.
template <typename S>
struct LabelTrace {
    S beta = S(0.9);
    S gain = S(0);

    void step() { gain = beta * gain + S(1); }
    Mat<S> materialize(const Mat<S>& labels) const { return gain * labels; }
};

/// Everything the per-step update needs from one layer's forward pass.
/// pre_* hold presynaptic activity in gradient layout: raw features for dense
/// layers, im2col patch rows for conv layers, labels at the first layer's
/// target side.
template <typename S>
struct LayerStepView {
    Mat<S> pre_in, pre_trg;
    Mat<S> own_prev_in, own_prev_trg;  // recurrent layers only
    Mat<S> v_in, v_trg;                // post-step potentials
};

template <typename S>
struct StepCapture {
    std::vector<LayerStepView<S>> layers;
};

template <typename S>
struct StepResult {
    Mat<S> out_in, out_trg;  // last layer's outputs per path
};

/// One synchronous time step through the whole stack, both paths. The input
/// path carries data spikes through W_l (and R_l); the target path carries
/// the one-hot labels through S into layer 1 and through the same W_l above.
template <typename S>
StepResult<S> forward_step(const TpNetwork<S>& net, std::vector<LayerState<S>>& states,
                           const Mat<S>& input, const Mat<S>& labels,
                           StepCapture<S>* capture = nullptr) {
    const Index batch = input.rows();
    if (input.cols() != net.input_width) throw DimensionError("forward_step: input width");
    if (labels.rows() != batch || labels.cols() != net.classes)
        throw DimensionError("forward_step: label shape");
    if (static_cast<Index>(states.size()) != net.depth())
        throw DimensionError("forward_step: state count");
    require_finite(input, "forward_step input");
    for (Index b = 0; b < batch; ++b) {
        S sum = S(0);
        for (Index k = 0; k < net.classes; ++k) {
            const S v = labels(b, k);
            if (std::abs(v) > S(1e-6) && std::abs(v - S(1)) > S(1e-6))
                throw ConfigError("forward_step: target rows must be one-hot");
            sum += v;
        }
        if (std::abs(sum - S(1)) > S(1e-6))
            throw ConfigError("forward_step: target rows must be one-hot");
    }

    if (capture) capture->layers.assign(net.layers.size(), LayerStepView<S>{});

    Mat<S> cur_in = input, cur_trg;
    for (Index l = 0; l < net.depth(); ++l) {
        const Layer<S>& layer = net.layers[l];
        LayerState<S>& st = states[l];
        const Mat<S> w_eff = layer.effective_w();

        Mat<S> pre_in_mat, pre_trg_mat, i_in, i_trg;
        if (layer.conv()) {
            const ConvGeom& g = layer.config.geom;
            pre_in_mat = im2col_3x3(cur_in, g);
            i_in = col2im(Mat<S>(pre_in_mat * w_eff), g, batch);
            if (l == 0) {
                pre_trg_mat = labels;
                i_trg = labels * net.s_proj;
            } else {
                pre_trg_mat = im2col_3x3(cur_trg, g);
                i_trg = col2im(Mat<S>(pre_trg_mat * w_eff), g, batch);
            }
        } else {
            pre_in_mat = cur_in;
            i_in = cur_in * w_eff;
            if (l == 0) {
                pre_trg_mat = labels;
                i_trg = labels * net.s_proj;
            } else {
                pre_trg_mat = cur_trg;
                i_trg = cur_trg * w_eff;
            }
        }

        Mat<S> own_prev_in, own_prev_trg, rec_in, rec_trg;
        if (layer.recurrent()) {
            own_prev_in = st.in.s_prev;
            own_prev_trg = st.trg.s_prev;
            if (layer.config.recurrent_form == RecurrentForm::Full) {
                rec_in = own_prev_in * layer.r;
                rec_trg = own_prev_trg * layer.r;
            } else {
                rec_in = own_prev_in.cwiseProduct(layer.r.replicate(batch, 1));
                rec_trg = own_prev_trg.cwiseProduct(layer.r.replicate(batch, 1));
            }
        }

        auto step_in =
            lif_step(st.in, i_in, layer.recurrent() ? &rec_in : nullptr, layer.config.lif);
        auto step_trg =
            lif_step(st.trg, i_trg, layer.recurrent() ? &rec_trg : nullptr, layer.config.lif);
        st.in = step_in.state;
        st.trg = step_trg.state;
        st.trace = update_traces(st.trace, step_in.spikes, step_trg.spikes);

        if (capture) {
            LayerStepView<S>& view = capture->layers[l];
            view.pre_in = std::move(pre_in_mat);
            view.pre_trg = std::move(pre_trg_mat);
            view.own_prev_in = std::move(own_prev_in);
            view.own_prev_trg = std::move(own_prev_trg);
            view.v_in = st.in.v;
            view.v_trg = st.trg.v;
        }

        if (layer.conv()) {
            const ConvGeom& g = layer.config.geom;
            PoolResult<S> pool_in = maxpool_2x2(step_in.spikes, g);
            cur_in = std::move(pool_in.values);
            if (layer.config.pool_shared_indices)
                cur_trg = gather_units(step_trg.spikes, pool_in.argmax);
            else
                cur_trg = maxpool_2x2(step_trg.spikes, g).values;
        } else {
            cur_in = step_in.spikes;
            cur_trg = step_trg.spikes;
        }
    }
    return {cur_in, cur_trg};
}

/// Per-sequence gradient buffers for the accumulate-then-apply cadence.
template <typename S>
struct GradAccum {
    std::vector<Mat<S>> dw, dr;
    Mat<S> ds;
    bool armed = false;
};

template <typename S>
struct TrainStepResult {
    std::vector<S> layer_loss;
    Mat<S> out_in;  // last-layer input-path output, what the readout integrates
};

namespace detail {

template <typename S>
void ensure_accum(GradAccum<S>& acc, const TpNetwork<S>& net) {
    if (acc.armed) return;
    acc.dw.clear();
    acc.dr.clear();
    for (const auto& layer : net.layers) {
        acc.dw.push_back(Mat<S>::Zero(layer.w.rows(), layer.w.cols()));
        acc.dr.push_back(layer.r.size() ? Mat<S>::Zero(layer.r.rows(), layer.r.cols())
                                        : Mat<S>());
    }
    acc.ds = Mat<S>::Zero(net.s_proj.rows(), net.s_proj.cols());
    acc.armed = true;
}

}  // namespace detail

/// One training time step of the stack: forward both paths, then for every
/// layer build the contrastive signal from its own traces and the previous
/// layer's target traces, and update W_l (and R_l, optionally S). With the
/// PerStep cadence updates land immediately; PerSequence adds them to accum.
template <typename S>
TrainStepResult<S> train_step(TpNetwork<S>& net, std::vector<LayerState<S>>& states,
                              LabelTrace<S>& label_trace, const Mat<S>& input,
                              const Mat<S>& labels, GradAccum<S>* accum = nullptr) {
    if (input.rows() < 2)
        throw ContrastiveBatchError("training requires a batch of at least 2");
    if (net.config.cadence == UpdateCadence::PerSequence) {
        if (!accum) throw ConfigError("train_step: sequence cadence needs an accumulator");
        detail::ensure_accum(*accum, net);
    }

    StepCapture<S> cap;
    StepResult<S> fwd = forward_step(net, states, input, labels, &cap);
    label_trace.step();

    TrainStepResult<S> result;
    result.out_in = std::move(fwd.out_in);
    result.layer_loss.resize(net.layers.size());
    for (Index l = 0; l < net.depth(); ++l) {
        const Layer<S>& layer = net.layers[l];
        const LayerStepView<S>& view = cap.layers[l];
        const TraceState<S>& trace = states[l].trace;

        const Mat<S> prev_trg =
            l == 0 ? label_trace.materialize(labels) : Mat<S>(states[l - 1].trace.eps_trg);
        const Mat<S> y = pairwise_targets(prev_trg, net.config.similarity);
        const Mat<S> z = pairwise_logits(trace.eps, trace.eps_trg);
        const S loss = local_loss(z, y, net.config.reduction);
        if (!std::isfinite(loss)) throw NumericError("train_step: local loss diverged");
        result.layer_loss[l] = loss;

        const Mat<S> mod = modulatory_signal(z, y);
        const RuleFactors<S> factors = post_factors(mod, trace.eps, trace.eps_trg, view.v_in,
                                                    view.v_trg, layer.config.lif,
                                                    net.config.reduction);

        const GradTerms terms = l == 0 ? GradTerms::InputOnly : GradTerms::Both;
        Mat<S> dw;
        if (layer.conv()) {
            const RuleFactors<S> patch_factors{
                factors_to_patch_rows(factors.d_in, layer.config.geom),
                factors_to_patch_rows(factors.d_trg, layer.config.geom)};
            dw = layer_gradient(view.pre_in, view.pre_trg, patch_factors, terms);
        } else {
            dw = layer_gradient(view.pre_in, view.pre_trg, factors, terms);
        }

        Mat<S> dr;
        if (layer.recurrent() && net.config.learn_recurrent) {
            if (layer.config.recurrent_form == RecurrentForm::Full)
                dr = layer_gradient(view.own_prev_in, view.own_prev_trg, factors);
            else
                dr = recurrent_diag_gradient(view.own_prev_in, view.own_prev_trg, factors)
                         .transpose();
        }

        Mat<S> ds;
        if (l == 0 && net.config.learn_target_propagator)
            ds = layer_gradient(Mat<S>(), labels, factors, GradTerms::TargetOnly);

        if (accum && net.config.cadence == UpdateCadence::PerSequence) {
            accum->dw[l] += dw;
            if (dr.size()) accum->dr[l] += dr;
            if (ds.size()) accum->ds += ds;
        } else {
            apply_update(net.layers[l].w, dw, net.config.eta);
            if (dr.size()) apply_update(net.layers[l].r, dr, net.config.eta);
            if (ds.size()) apply_update(net.s_proj, ds, net.config.eta);
        }
    }
    return result;
}

/// Applies and clears gradients accumulated across a sequence.
template <typename S>
void apply_accumulated(TpNetwork<S>& net, GradAccum<S>& accum) {
    if (!accum.armed) return;
    for (Index l = 0; l < net.depth(); ++l) {
        apply_update(net.layers[l].w, accum.dw[l], net.config.eta);
        if (accum.dr[l].size()) apply_update(net.layers[l].r, accum.dr[l], net.config.eta);
    }
    if (net.config.learn_target_propagator) apply_update(net.s_proj, accum.ds, net.config.eta);
    accum.armed = false;
}

template <typename S>
struct ReadoutState {
    Mat<S> acc;     // integrated readout currents [batch, classes]
    Mat<S> counts;  // summed last-layer spikes [batch, last out_width]

    static ReadoutState zero(Index batch, Index features, Index classes) {
        return {Mat<S>::Zero(batch, classes), Mat<S>::Zero(batch, features)};
    }
};

template <typename S>
void readout_step(ReadoutState<S>& readout, const Mat<S>& last_spikes,
                  const Mat<S>& readout_weights) {
    if (last_spikes.cols() != readout_weights.rows())
        throw DimensionError("readout_step: feature width mismatch");
    readout.acc += last_spikes * readout_weights;
    readout.counts += last_spikes;
}

/// Highest integrated value wins; exact ties go to the lowest class index.
template <typename S>
std::vector<Index> predict(const ReadoutState<S>& readout) {
    std::vector<Index> out(readout.acc.rows());
    for (Index b = 0; b < readout.acc.rows(); ++b) {
        Index best = 0;
        for (Index k = 1; k < readout.acc.cols(); ++k)
            if (readout.acc(b, k) > readout.acc(b, best)) best = k;
        out[b] = best;
    }
    return out;
}

/// Delta-rule update of the integrator weights from the sequence-end
/// cross entropy on the accumulated logits.
template <typename S>
void train_readout(TpNetwork<S>& net, const ReadoutState<S>& readout, const Mat<S>& labels) {
    require_finite(readout.acc, "readout accumulator");
    const Mat<S> err = softmax_rows(readout.acc) - labels;
    const Mat<S> grad = readout.counts.transpose() * err / S(labels.rows());
    apply_update(net.readout, grad, net.config.readout_eta);
}

}  // namespace tp
