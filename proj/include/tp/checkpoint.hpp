#pragma once

#include <string>

#include "tp/network.hpp"
#include "tp/serialize.hpp"

namespace tp {

inline constexpr char kCheckpointMagic[] = "TPCKPT1";

/// Writes every learned tensor in the fixed order (W_1, R_1 if present, ...,
/// S, readout). Dimensions travel with each tensor; the architecture itself
/// does not, so loading requires a structurally matching network.
template <typename S>
void save_checkpoint(const TpNetwork<S>& net, const std::string& path) {
    ByteWriter w(path);
    w.magic(kCheckpointMagic, 7);
    w.u32(static_cast<std::uint32_t>(net.layers.size()));
    for (const auto& layer : net.layers) {
        write_tensor(w, layer.w);
        if (layer.r.size()) write_tensor(w, layer.r);
    }
    write_tensor(w, net.s_proj);
    write_tensor(w, net.readout);
}

namespace detail {

template <typename S>
void load_into(ByteReader& r, Mat<S>& dst, const char* what) {
    const std::size_t at = r.offset;
    Mat<S> m = read_tensor<S>(r, what);
    if (m.rows() != dst.rows() || m.cols() != dst.cols())
        throw FormatError(std::string(what) + " shape does not match the network", at);
    dst = std::move(m);
}

}  // namespace detail

/// Loads a checkpoint into an already constructed network, validating the
/// layer count and every tensor shape against it.
template <typename S>
void load_checkpoint(TpNetwork<S>& net, const std::string& path) {
    ByteReader r(path);
    r.expect_magic(kCheckpointMagic, 7, "checkpoint");
    const std::size_t count_at = r.offset;
    const std::uint32_t layers = r.u32("layer count");
    if (layers != static_cast<std::uint32_t>(net.layers.size()))
        throw FormatError("checkpoint layer count does not match the network", count_at);
    for (auto& layer : net.layers) {
        detail::load_into(r, layer.w, "layer weights");
        if (layer.r.size()) detail::load_into(r, layer.r, "recurrent weights");
    }
    detail::load_into(r, net.s_proj, "target propagator");
    detail::load_into(r, net.readout, "readout weights");
    if (!r.at_eof()) throw FormatError("trailing bytes after checkpoint payload", r.offset);
}

}  // namespace tp
