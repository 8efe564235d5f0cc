#pragma once

#include <cstdint>
#include <vector>

#include "tp/network.hpp"
#include "tp/tensor.hpp"

namespace tp {

/// Architecture description for the analytical cost model. `hidden` holds the
/// state width of every trained layer (for conv layers, channels x spatial);
/// the data fan-in of the first layer is input_width, so the two indexing
/// conventions of the MAC and memory formulas both resolve unambiguously.
struct ArchSpec {
    Index input_width = 0;
    std::vector<Index> hidden;
    Index batch = 1;
    Index steps = 1;
    Index classes = 1;
    Index tess_step = 0;  // per-layer update interval of the staggered baseline

    void validate() const {
        if (input_width < 1 || batch < 1 || steps < 1 || classes < 1)
            throw ConfigError("cost: sizes must be positive");
        for (Index h : hidden)
            if (h < 1) throw ConfigError("cost: layer widths must be positive");
        if (tess_step < 0 || tess_step >= steps)
            throw ConfigError("cost: staggered update step must be in [0, steps)");
    }

    Index fan_in(std::size_t l) const {
        return l == 0 ? input_width : hidden[l - 1];
    }
};

/// MACs of one TP training pass: per layer and step, trace updates (2BH),
/// logits (B^2 H), targets (B^2 F), and the two gradient products (2 B^2 F H).
inline std::uint64_t macs_tp(const ArchSpec& spec) {
    spec.validate();
    const std::uint64_t b = spec.batch;
    std::uint64_t per_step = 0;
    for (std::size_t l = 0; l < spec.hidden.size(); ++l) {
        const std::uint64_t h = spec.hidden[l], f = spec.fan_in(l);
        per_step += 2 * b * h + b * b * h + b * b * f + 2 * b * b * f * h;
    }
    return static_cast<std::uint64_t>(spec.steps) * per_step;
}

/// MACs of the staggered-update baseline, active for the trailing
/// (steps - tess_step) steps of the sequence.
inline std::uint64_t macs_tess(const ArchSpec& spec) {
    spec.validate();
    const std::uint64_t b = spec.batch, o = spec.classes;
    std::uint64_t per_step = 0;
    for (std::size_t l = 0; l < spec.hidden.size(); ++l) {
        const std::uint64_t h = spec.hidden[l], f = spec.fan_in(l);
        per_step += b * h + b * f + b * h * o + b * h + 2 * b * f * h;
    }
    return static_cast<std::uint64_t>(spec.steps - spec.tess_step) * per_step;
}

/// Training-state scalars of TP: the class projection (O x first layer) plus
/// four per-unit batch tensors (two potentials, two traces).
inline std::uint64_t memory_tp(const ArchSpec& spec) {
    spec.validate();
    if (spec.hidden.empty()) return 0;
    std::uint64_t sum = 0;
    for (Index h : spec.hidden) sum += static_cast<std::uint64_t>(h);
    return static_cast<std::uint64_t>(spec.classes) * spec.hidden.front() +
           4 * static_cast<std::uint64_t>(spec.batch) * sum;
}

/// Training-state scalars of the staggered baseline: (3B + O) per unit.
inline std::uint64_t memory_tess(const ArchSpec& spec) {
    spec.validate();
    std::uint64_t sum = 0;
    for (Index h : spec.hidden) sum += static_cast<std::uint64_t>(h);
    return (3 * static_cast<std::uint64_t>(spec.batch) + spec.classes) * sum;
}

/// Deep-stack limit of memory_tess / memory_tp: (3B + O) / (4B). Above 1
/// exactly when classes outnumber the batch.
inline double relative_memory_cost(Index batch, Index classes) {
    if (batch < 1 || classes < 1) throw ConfigError("cost: sizes must be positive");
    return double(3 * batch + classes) / double(4 * batch);
}

struct MemoryAudit {
    std::uint64_t counted = 0;  // state scalars actually allocated
    long long delta = 0;        // counted minus the formula
};

/// Counts the live training-state allocations of a real network (input and
/// target potentials, input and target traces, the class projection) and
/// compares them with memory_tp. Binary previous-spike latches fall outside
/// the formula's state accounting and are excluded. The layer-0 label trace
/// is a closed-form scalar gain, never allocated, so it does not appear on
/// either side.
template <typename S>
MemoryAudit audit_live_memory(const TpNetwork<S>& net, Index batch) {
    auto states = init_states(net, batch);
    MemoryAudit audit;
    for (const auto& st : states)
        audit.counted += static_cast<std::uint64_t>(st.in.v.size()) + st.trg.v.size() +
                         st.trace.eps.size() + st.trace.eps_trg.size();
    audit.counted += static_cast<std::uint64_t>(net.s_proj.size());

    ArchSpec spec;
    spec.input_width = net.input_width;
    for (const auto& layer : net.layers) spec.hidden.push_back(layer.units);
    spec.batch = batch;
    spec.classes = net.classes;
    audit.delta = static_cast<long long>(audit.counted) -
                  static_cast<long long>(memory_tp(spec));
    return audit;
}

}  // namespace tp
