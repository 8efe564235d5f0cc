#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "tp/container.hpp"
#include "tp/tensor.hpp"

namespace tp {

struct Event {
    std::int64_t t_us = 0;
    Index unit = 0;
    int polarity = 1;
};

struct EventStream {
    std::vector<Event> events;
    std::int64_t duration_us = 0;
    Index num_units = 0;
};

enum class BinMode { Count, Binary };

/// Accumulates events into fixed windows: frame[t, u] covers
/// [t*window, (t+1)*window). Events beyond max_steps windows are dropped,
/// short streams pad with zero rows. Counts are raw; any clipping or scaling
/// is the converter's business.
inline Matf bin_events(const EventStream& stream, std::int64_t window_us, Index max_steps,
                       BinMode mode) {
    if (window_us <= 0) throw ConfigError("bin_events: window must be positive");
    if (max_steps < 1) throw ConfigError("bin_events: need at least one step");
    Matf frame = Matf::Zero(max_steps, stream.num_units);
    for (const Event& e : stream.events) {
        if (e.unit < 0 || e.unit >= stream.num_units)
            throw DimensionError("bin_events: unit index out of range");
        if (e.t_us < 0) continue;
        const Index t = static_cast<Index>(e.t_us / window_us);
        if (t >= max_steps) continue;
        if (mode == BinMode::Count)
            frame(t, e.unit) += 1.0f;
        else
            frame(t, e.unit) = 1.0f;
    }
    return frame;
}

struct SynthParams {
    Index num_classes = 10;
    Index units = 100;
    Index steps = 20;
    Index samples_per_class = 20;
    double rate_hi = 0.8;
    double rate_lo = 0.05;
    double jitter = 0.05;

    void validate() const {
        if (num_classes < 2) throw ConfigError("synth: need at least two classes");
        if (units < num_classes) throw ConfigError("synth: need at least one unit per class");
        if (steps < 1 || samples_per_class < 1) throw ConfigError("synth: empty task");
        if (!(rate_lo >= 0.0 && rate_lo < rate_hi && rate_hi <= 1.0))
            throw ConfigError("synth: rates must satisfy 0 <= lo < hi <= 1");
        if (!(jitter >= 0.0 && jitter <= 1.0)) throw ConfigError("synth: jitter in [0,1]");
    }
};

/// Spatial rate-coded task: each class owns a fixed random subset of units
/// firing at rate_hi while the rest idle at rate_lo; jitter flips spikes.
inline FrameTensor synth_task(const SynthParams& p, unsigned seed) {
    p.validate();
    Rng rng(seed);
    const Index active_per_class = std::max<Index>(p.units / p.num_classes, 1);

    std::vector<std::vector<char>> active(p.num_classes, std::vector<char>(p.units, 0));
    std::vector<Index> pool(p.units);
    std::iota(pool.begin(), pool.end(), Index(0));
    for (Index c = 0; c < p.num_classes; ++c) {
        std::shuffle(pool.begin(), pool.end(), rng);
        for (Index k = 0; k < active_per_class; ++k) active[c][pool[k]] = 1;
    }

    std::uniform_real_distribution<double> coin(0.0, 1.0);
    FrameTensor data;
    data.steps = p.steps;
    data.features = p.units;
    data.num_classes = p.num_classes;
    for (Index c = 0; c < p.num_classes; ++c)
        for (Index s = 0; s < p.samples_per_class; ++s) {
            Matf frame(p.steps, p.units);
            for (Index t = 0; t < p.steps; ++t)
                for (Index u = 0; u < p.units; ++u) {
                    const double rate = active[c][u] ? p.rate_hi : p.rate_lo;
                    float spike = coin(rng) < rate ? 1.0f : 0.0f;
                    if (p.jitter > 0.0 && coin(rng) < p.jitter) spike = 1.0f - spike;
                    frame(t, u) = spike;
                }
            data.frames.push_back(std::move(frame));
            data.labels.push_back(c);
        }
    return data;
}

struct TemporalOrderParams {
    Index num_classes = 4;
    Index groups = 4;
    Index units_per_group = 8;
    Index steps_per_slot = 4;
    Index samples_per_class = 20;
    double rate_hi = 0.9;
    double rate_lo = 0.02;
    double jitter = 0.02;

    Index units() const { return groups * units_per_group; }
    Index steps() const { return groups * steps_per_slot; }

    void validate() const {
        if (num_classes < 2 || groups < 2 || units_per_group < 1 || steps_per_slot < 1 ||
            samples_per_class < 1)
            throw ConfigError("temporal order: degenerate sizes");
        if (!(rate_lo >= 0.0 && rate_lo < rate_hi && rate_hi <= 1.0))
            throw ConfigError("temporal order: rates must satisfy 0 <= lo < hi <= 1");
        std::uint64_t perms = 1;
        for (Index g = 2; g <= groups; ++g) perms *= static_cast<std::uint64_t>(g);
        if (static_cast<std::uint64_t>(num_classes) > perms)
            throw ConfigError("temporal order: more classes than group orderings");
    }
};

/// Order-coded task: units fall into groups, time into slots, and each class
/// fires the groups in its own slot order. Every class activates every group
/// exactly once, so time-summed counts carry no class signal; only the firing
/// order separates classes.
inline FrameTensor synth_temporal_order(const TemporalOrderParams& p, unsigned seed) {
    p.validate();
    Rng rng(seed);

    std::vector<Index> order(p.groups);
    std::iota(order.begin(), order.end(), Index(0));
    std::vector<std::vector<Index>> class_order;
    while (static_cast<Index>(class_order.size()) < p.num_classes) {
        std::shuffle(order.begin(), order.end(), rng);
        if (std::find(class_order.begin(), class_order.end(), order) == class_order.end())
            class_order.push_back(order);
    }

    std::uniform_real_distribution<double> coin(0.0, 1.0);
    FrameTensor data;
    data.steps = p.steps();
    data.features = p.units();
    data.num_classes = p.num_classes;
    for (Index c = 0; c < p.num_classes; ++c)
        for (Index s = 0; s < p.samples_per_class; ++s) {
            Matf frame(p.steps(), p.units());
            for (Index slot = 0; slot < p.groups; ++slot) {
                const Index hot_group = class_order[c][slot];
                for (Index dt = 0; dt < p.steps_per_slot; ++dt) {
                    const Index t = slot * p.steps_per_slot + dt;
                    for (Index u = 0; u < p.units(); ++u) {
                        const bool hot = u / p.units_per_group == hot_group;
                        const double rate = hot ? p.rate_hi : p.rate_lo;
                        float spike = coin(rng) < rate ? 1.0f : 0.0f;
                        if (p.jitter > 0.0 && coin(rng) < p.jitter) spike = 1.0f - spike;
                        frame(t, u) = spike;
                    }
                }
            }
            data.frames.push_back(std::move(frame));
            data.labels.push_back(c);
        }
    return data;
}

/// Class-conditional deployment shift: for each class a fixed random subset
/// of units (given fraction) is permuted among itself, the same way for every
/// sample of that class. Simulates a new user whose activity pattern moved.
inline FrameTensor apply_user_shift(const FrameTensor& data, double fraction, unsigned seed) {
    if (!(fraction >= 0.0 && fraction <= 1.0))
        throw ConfigError("user shift: fraction must be in [0,1]");
    data.validate();
    Rng rng(seed);

    std::vector<std::vector<Index>> unit_map(data.num_classes,
                                             std::vector<Index>(data.features));
    std::vector<Index> pool(data.features);
    std::iota(pool.begin(), pool.end(), Index(0));
    const Index moved = static_cast<Index>(std::llround(fraction * double(data.features)));
    for (Index c = 0; c < data.num_classes; ++c) {
        std::iota(unit_map[c].begin(), unit_map[c].end(), Index(0));
        std::shuffle(pool.begin(), pool.end(), rng);
        std::vector<Index> chosen(pool.begin(), pool.begin() + moved);
        std::vector<Index> rotated = chosen;
        std::rotate(rotated.begin(), rotated.begin() + (moved > 1 ? 1 : 0), rotated.end());
        for (Index k = 0; k < moved; ++k) unit_map[c][chosen[k]] = rotated[k];
    }

    FrameTensor out = data;
    for (std::size_t i = 0; i < data.frames.size(); ++i) {
        const auto& map = unit_map[data.labels[i]];
        for (Index t = 0; t < data.steps; ++t)
            for (Index u = 0; u < data.features; ++u)
                out.frames[i](t, map[u]) = data.frames[i](t, u);
    }
    return out;
}

inline FrameTensor subset(const FrameTensor& data, const std::vector<Index>& indices) {
    FrameTensor out;
    out.steps = data.steps;
    out.features = data.features;
    out.num_classes = data.num_classes;
    for (Index i : indices) {
        out.frames.push_back(data.frames[i]);
        out.labels.push_back(data.labels[i]);
    }
    return out;
}

struct KShotSplit {
    FrameTensor support;
    FrameTensor query;
    Index k = 0;
};

/// Splits per class into a support pool and query set by `ratio`, then keeps
/// min(k, pool) support samples per class. Support and query are disjoint.
inline KShotSplit kshot_split(const FrameTensor& data, Index k, double ratio, unsigned seed) {
    if (k < 1) throw ConfigError("kshot: k must be at least 1");
    if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("kshot: ratio must be in (0,1)");
    data.validate();
    Rng rng(seed);

    std::vector<std::vector<Index>> by_class(data.num_classes);
    for (Index i = 0; i < data.samples(); ++i) by_class[data.labels[i]].push_back(i);

    std::vector<Index> support_idx, query_idx;
    for (Index c = 0; c < data.num_classes; ++c) {
        auto& members = by_class[c];
        if (members.empty()) throw ConfigError("kshot: every class must be present");
        std::shuffle(members.begin(), members.end(), rng);
        const Index pool = std::max<Index>(
            1, static_cast<Index>(std::llround(ratio * double(members.size()))));
        const Index take = std::min<Index>(k, pool);
        for (Index j = 0; j < take; ++j) support_idx.push_back(members[j]);
        for (std::size_t j = pool; j < members.size(); ++j) query_idx.push_back(members[j]);
    }
    std::sort(support_idx.begin(), support_idx.end());
    std::sort(query_idx.begin(), query_idx.end());
    return {subset(data, support_idx), subset(data, query_idx), k};
}

/// Nearest-centroid classifier on time-summed spike counts: the sanity oracle
/// that bounds what is solvable without temporal structure.
inline double count_baseline_accuracy(const FrameTensor& train, const FrameTensor& test) {
    train.validate();
    test.validate();
    if (train.features != test.features) throw DimensionError("count baseline: feature mismatch");

    Matd centroids = Matd::Zero(train.num_classes, train.features);
    std::vector<Index> counts(train.num_classes, 0);
    for (Index i = 0; i < train.samples(); ++i) {
        centroids.row(train.labels[i]) += train.frames[i].colwise().sum().cast<double>();
        ++counts[train.labels[i]];
    }
    for (Index c = 0; c < train.num_classes; ++c)
        if (counts[c] > 0) centroids.row(c) /= double(counts[c]);

    Index hits = 0;
    for (Index i = 0; i < test.samples(); ++i) {
        const Vec<double> sum = test.frames[i].colwise().sum().cast<double>().transpose();
        Index best = 0;
        double best_d = (centroids.row(0).transpose() - sum).squaredNorm();
        for (Index c = 1; c < train.num_classes; ++c) {
            const double d = (centroids.row(c).transpose() - sum).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        if (best == test.labels[i]) ++hits;
    }
    return test.samples() ? double(hits) / double(test.samples()) : 0.0;
}

/// Deterministic per-class interleave split, test_every-th sample held out.
inline void holdout_split(const FrameTensor& data, Index test_every, FrameTensor& train,
                          FrameTensor& test) {
    if (test_every < 2) throw ConfigError("holdout: test_every must be at least 2");
    std::vector<Index> train_idx, test_idx;
    std::vector<Index> seen(data.num_classes, 0);
    for (Index i = 0; i < data.samples(); ++i) {
        if (seen[data.labels[i]]++ % test_every == test_every - 1)
            test_idx.push_back(i);
        else
            train_idx.push_back(i);
    }
    train = subset(data, train_idx);
    test = subset(data, test_idx);
}

}  // namespace tp
