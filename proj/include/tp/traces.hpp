#pragma once

#include "tp/tensor.hpp"

namespace tp {

/// Eligibility traces for one layer: low-pass filtered spike trains on the
/// input path (eps) and the target path (eps_trg).
template <typename S>
struct TraceState {
    Mat<S> eps;      // [batch, neurons]
    Mat<S> eps_trg;  // [batch, neurons]
    S beta = S(0.9); // trace decay per step, in [0, 1)

    static TraceState zero(Index batch, Index neurons, S beta) {
        if (!(beta >= S(0) && beta < S(1))) throw ConfigError("traces: beta must be in [0,1)");
        return {Mat<S>::Zero(batch, neurons), Mat<S>::Zero(batch, neurons), beta};
    }
};

/// One trace update per path:
///   eps'     = beta*eps     + spikes
///   eps_trg' = beta*eps_trg + spikes_trg
/// With binary spikes every entry stays in [0, 1/(1-beta)).
template <typename S>
TraceState<S> update_traces(const TraceState<S>& t, const Mat<S>& spikes,
                            const Mat<S>& spikes_trg) {
    require_same_shape(t.eps, spikes, "update_traces");
    require_same_shape(t.eps_trg, spikes_trg, "update_traces");
    return {t.beta * t.eps + spikes, t.beta * t.eps_trg + spikes_trg, t.beta};
}

}  // namespace tp
