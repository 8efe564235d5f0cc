#pragma once

#include "tp/lif.hpp"
#include "tp/loss.hpp"
#include "tp/tensor.hpp"
#include "tp/traces.hpp"

namespace tp {

/// Which of the two weight-sharing terms a gradient carries. Weights used by
/// both paths take Both; the first layer's feed-forward weights only see the
/// input path, and the label projection only the target path.
enum class GradTerms { Both, InputOnly, TargetOnly };

/// Per-neuron error factors, one per path:
///   d_in  = (mod   * eps_trg) .* theta'(v)
///   d_trg = (mod^T * eps)     .* theta'(v_trg)
/// Every term is local to the layer: the modulatory signal, this layer's own
/// traces, and this layer's membrane potentials.
template <typename S>
struct RuleFactors {
    Mat<S> d_in;   // [batch, post]
    Mat<S> d_trg;  // [batch, post]
};

template <typename S>
RuleFactors<S> post_factors(const Mat<S>& mod, const Mat<S>& eps, const Mat<S>& eps_trg,
                            const Mat<S>& v, const Mat<S>& v_trg, const LifParams<S>& params,
                            Reduction reduction = Reduction::Mean) {
    require_same_shape(eps, eps_trg, "post_factors traces");
    require_same_shape(v, v_trg, "post_factors potentials");
    require_same_shape(eps, v, "post_factors");
    if (mod.rows() != mod.cols() || mod.rows() != eps.rows())
        throw DimensionError("post_factors: modulatory signal must be [batch, batch]");

    const S scale = reduction == Reduction::Mean ? S(1) / S(mod.rows()) : S(1);
    Mat<S> d_in = scale * (mod * eps_trg).cwiseProduct(surrogate_derivative(v, params));
    Mat<S> d_trg =
        scale * (mod.transpose() * eps).cwiseProduct(surrogate_derivative(v_trg, params));
    return {d_in, d_trg};
}

/// Weight gradient from presynaptic spikes and post factors:
///   dW = pre_in^T * d_in + pre_trg^T * d_trg       [fan_in, post]
/// restricted to the terms the weight actually participates in.
template <typename S>
Mat<S> layer_gradient(const Mat<S>& pre_in, const Mat<S>& pre_trg, const RuleFactors<S>& f,
                      GradTerms terms = GradTerms::Both) {
    Mat<S> grad;
    if (terms != GradTerms::TargetOnly) {
        if (pre_in.rows() != f.d_in.rows())
            throw DimensionError("layer_gradient: input path batch mismatch");
        grad = pre_in.transpose() * f.d_in;
    }
    if (terms != GradTerms::InputOnly) {
        if (pre_trg.rows() != f.d_trg.rows())
            throw DimensionError("layer_gradient: target path batch mismatch");
        Mat<S> g = pre_trg.transpose() * f.d_trg;
        grad = grad.size() == 0 ? g : Mat<S>(grad + g);
    }
    return grad;
}

/// One-call form: factors from the modulatory signal and this layer's state,
/// then the presynaptic outer products.
template <typename S>
Mat<S> layer_gradient(const Mat<S>& mod, const TraceState<S>& trace, const Mat<S>& v,
                      const Mat<S>& v_trg, const Mat<S>& pre_in, const Mat<S>& pre_trg,
                      const LifParams<S>& params, GradTerms terms = GradTerms::Both,
                      Reduction reduction = Reduction::Mean) {
    const RuleFactors<S> f =
        post_factors(mod, trace.eps, trace.eps_trg, v, v_trg, params, reduction);
    return layer_gradient(pre_in, pre_trg, f, terms);
}

/// Diagonal restriction of layer_gradient for per-neuron recurrent weights.
template <typename S>
Vec<S> recurrent_diag_gradient(const Mat<S>& pre_in, const Mat<S>& pre_trg,
                               const RuleFactors<S>& f, GradTerms terms = GradTerms::Both) {
    Vec<S> grad = Vec<S>::Zero(f.d_in.cols());
    if (terms != GradTerms::TargetOnly)
        grad += pre_in.cwiseProduct(f.d_in).colwise().sum().transpose();
    if (terms != GradTerms::InputOnly)
        grad += pre_trg.cwiseProduct(f.d_trg).colwise().sum().transpose();
    return grad;
}

/// Plain gradient step W -= eta * grad.
template <typename S>
void apply_update(Mat<S>& w, const Mat<S>& grad, S eta) {
    require_same_shape(w, grad, "apply_update");
    w -= eta * grad;
}

}  // namespace tp
