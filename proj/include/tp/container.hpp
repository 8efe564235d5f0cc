#pragma once

#include <string>
#include <vector>

#include "tp/serialize.hpp"
#include "tp/tensor.hpp"

namespace tp {

/// A labeled set of frame sequences: one [steps, features] matrix per sample.
struct FrameTensor {
    Index steps = 0;
    Index features = 0;
    Index num_classes = 0;
    std::vector<Matf> frames;
    std::vector<Index> labels;

    Index samples() const { return static_cast<Index>(frames.size()); }

    void validate() const {
        if (frames.size() != labels.size())
            throw DimensionError("frame tensor: one label per sample");
        for (std::size_t i = 0; i < frames.size(); ++i) {
            if (frames[i].rows() != steps || frames[i].cols() != features)
                throw DimensionError("frame tensor: sample shape mismatch");
            if (labels[i] < 0 || labels[i] >= num_classes)
                throw DimensionError("frame tensor: label out of range");
        }
    }
};

inline constexpr char kContainerMagic[] = "TPDATA1";

inline void save_container(const FrameTensor& data, const std::string& path) {
    data.validate();
    ByteWriter w(path);
    w.magic(kContainerMagic, 7);
    w.u32(static_cast<std::uint32_t>(data.samples()));
    w.u32(static_cast<std::uint32_t>(data.steps));
    w.u32(static_cast<std::uint32_t>(data.features));
    w.u32(static_cast<std::uint32_t>(data.num_classes));
    for (Index lab : data.labels) w.u32(static_cast<std::uint32_t>(lab));
    for (const Matf& frame : data.frames)
        for (Index t = 0; t < frame.rows(); ++t)
            for (Index f = 0; f < frame.cols(); ++f) w.f32(frame(t, f));
}

inline FrameTensor load_container(const std::string& path) {
    ByteReader r(path);
    r.expect_magic(kContainerMagic, 7, "data container");
    FrameTensor data;
    const std::uint32_t samples = r.u32("sample count");
    data.steps = r.u32("step count");
    data.features = r.u32("feature count");
    const std::size_t classes_at = r.offset;
    data.num_classes = r.u32("class count");
    if (data.num_classes < 1) throw FormatError("container has no classes", classes_at);
    if (std::uint64_t(samples) * data.steps * data.features > (std::uint64_t(1) << 34))
        throw FormatError("container dimensions overflow", classes_at);

    data.labels.reserve(samples);
    for (std::uint32_t i = 0; i < samples; ++i) {
        const std::size_t at = r.offset;
        const std::uint32_t lab = r.u32("label");
        if (lab >= static_cast<std::uint32_t>(data.num_classes))
            throw FormatError("label out of range", at);
        data.labels.push_back(static_cast<Index>(lab));
    }
    data.frames.reserve(samples);
    for (std::uint32_t i = 0; i < samples; ++i) {
        Matf frame(data.steps, data.features);
        for (Index t = 0; t < data.steps; ++t)
            for (Index f = 0; f < data.features; ++f) frame(t, f) = r.f32("frame payload");
        data.frames.push_back(std::move(frame));
    }
    if (!r.at_eof()) throw FormatError("trailing bytes after container payload", r.offset);
    return data;
}

}  // namespace tp
