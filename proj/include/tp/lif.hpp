#pragma once

#include <cmath>
#include <numbers>
#include <type_traits>

#include "tp/tensor.hpp"

namespace tp {

/// Leaky-integrate-and-fire parameters, shared by the input and target paths
/// of a layer.
template <typename S>
struct LifParams {
    S alpha = S(0.9);          // membrane decay per step, in [0, 1]
    S v_th = S(1);             // firing threshold, > 0
    S surrogate_scale = S(1);  // width of the arctan spike derivative, > 0

    void validate() const {
        if (!(alpha >= S(0) && alpha <= S(1))) throw ConfigError("lif: alpha must be in [0,1]");
        if (!(v_th > S(0))) throw ConfigError("lif: v_th must be > 0");
        if (!(surrogate_scale > S(0))) throw ConfigError("lif: surrogate_scale must be > 0");
    }
};

/// Membrane potentials and previous-step spikes, one row per batch element.
template <typename S>
struct MembraneState {
    Mat<S> v;       // [batch, neurons]
    Mat<S> s_prev;  // [batch, neurons], entries in {0, 1}

    static MembraneState zero(Index batch, Index neurons) {
        return {Mat<S>::Zero(batch, neurons), Mat<S>::Zero(batch, neurons)};
    }
};

template <typename S>
struct LifStep {
    MembraneState<S> state;  // state.s_prev equals spikes
    Mat<S> spikes;
};

/// One membrane update with soft reset by threshold subtraction:
///   v' = alpha*v + input_current + recurrent_current - s_prev*v_th
/// Spikes fire where v' >= v_th (crossing at equality counts as a spike).
/// Pass recurrent_current = nullptr for feed-forward layers.
template <typename S>
LifStep<S> lif_step(const MembraneState<S>& state, const Mat<S>& input_current,
                    const std::type_identity_t<Mat<S>>* recurrent_current,
                    const LifParams<S>& params) {
    params.validate();
    require_same_shape(state.v, input_current, "lif_step");
    require_same_shape(state.v, state.s_prev, "lif_step");
    if (recurrent_current) require_same_shape(state.v, *recurrent_current, "lif_step");
    require_finite(input_current, "lif_step input current");

    Mat<S> v = params.alpha * state.v + input_current - params.v_th * state.s_prev;
    if (recurrent_current) v += *recurrent_current;
    require_finite(v, "lif_step potential");

    Mat<S> spikes = (v.array() >= params.v_th).template cast<S>();
    return {{v, spikes}, spikes};
}

/// Arctan surrogate spike derivative, evaluated at v against the threshold:
///   theta'(u) = s / (1 + (pi*s*u/2)^2),  u = v - v_th
/// Even around v_th, maximal value s at the threshold, strictly positive.
template <typename S>
Mat<S> surrogate_derivative(const Mat<S>& v, const LifParams<S>& params) {
    params.validate();
    constexpr S pi = std::numbers::pi_v<S>;
    const S s = params.surrogate_scale;
    auto u = (v.array() - params.v_th) * (pi * s / S(2));
    return (s / (S(1) + u.square())).matrix();
}

/// Smoothed spike function whose exact derivative is surrogate_derivative:
///   sigma(u) = (2/pi) * atan(pi*s*u/2),  u = v - v_th
/// Used only by the gradient oracle, which replaces the step function with
/// this so the smoothed model is differentiable.
template <typename S>
Mat<S> surrogate_antiderivative(const Mat<S>& v, const LifParams<S>& params) {
    params.validate();
    constexpr S pi = std::numbers::pi_v<S>;
    const S s = params.surrogate_scale;
    Mat<S> out(v.rows(), v.cols());
    for (Index i = 0; i < v.rows(); ++i)
        for (Index j = 0; j < v.cols(); ++j)
            out(i, j) = (S(2) / pi) * std::atan(pi * s * (v(i, j) - params.v_th) / S(2));
    return out;
}

}  // namespace tp
