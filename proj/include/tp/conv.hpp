#pragma once

#include <limits>

#include "tp/tensor.hpp"

namespace tp {

/// 3x3 same-padded stride-1 convolution geometry followed by 2x2 max pooling.
/// Unit layout is channel-major: unit = channel*(height*width) + row*width + col.
struct ConvGeom {
    Index in_channels = 1;
    Index height = 0;
    Index width = 0;
    Index out_channels = 1;

    void validate() const {
        if (in_channels < 1 || out_channels < 1 || height < 1 || width < 1)
            throw ConfigError("conv: all dimensions must be positive");
        if (height % 2 != 0 || width % 2 != 0)
            throw ConfigError("conv: height and width must be even for 2x2 pooling");
    }
    Index in_units() const { return in_channels * height * width; }
    Index patches() const { return height * width; }
    Index patch_size() const { return in_channels * 9; }
    Index conv_units() const { return out_channels * patches(); }
    Index pooled_units() const { return out_channels * (height / 2) * (width / 2); }
};

/// Unfolds [batch, in_units] maps into patch rows [batch*patches, patch_size],
/// zero-padding the border. Row b*P+p holds the 3x3 neighborhood centered on
/// patch p of sample b.
template <typename S>
Mat<S> im2col_3x3(const Mat<S>& x, const ConvGeom& g) {
    if (x.cols() != g.in_units()) throw DimensionError("im2col: input width mismatch");
    const Index batch = x.rows(), hw = g.height * g.width;
    Mat<S> out = Mat<S>::Zero(batch * g.patches(), g.patch_size());
    for (Index b = 0; b < batch; ++b)
        for (Index row = 0; row < g.height; ++row)
            for (Index col = 0; col < g.width; ++col) {
                const Index patch_row = b * g.patches() + row * g.width + col;
                for (Index c = 0; c < g.in_channels; ++c)
                    for (Index dr = -1; dr <= 1; ++dr) {
                        const Index r = row + dr;
                        if (r < 0 || r >= g.height) continue;
                        for (Index dc = -1; dc <= 1; ++dc) {
                            const Index cc = col + dc;
                            if (cc < 0 || cc >= g.width) continue;
                            out(patch_row, c * 9 + (dr + 1) * 3 + (dc + 1)) =
                                x(b, c * hw + r * g.width + cc);
                        }
                    }
            }
    return out;
}

/// Folds the [batch*patches, out_channels] product of im2col and a kernel
/// matrix back into [batch, out_channels*patches].
template <typename S>
Mat<S> col2im(const Mat<S>& y, const ConvGeom& g, Index batch) {
    if (y.rows() != batch * g.patches() || y.cols() != g.out_channels)
        throw DimensionError("col2im: shape mismatch");
    Mat<S> out(batch, g.conv_units());
    for (Index b = 0; b < batch; ++b)
        for (Index oc = 0; oc < g.out_channels; ++oc)
            for (Index p = 0; p < g.patches(); ++p)
                out(b, oc * g.patches() + p) = y(b * g.patches() + p, oc);
    return out;
}

/// Spreads per-unit factors [batch, conv_units] into the patch-row layout
/// [batch*patches, out_channels] so kernel gradients reduce to one GEMM.
template <typename S>
Mat<S> factors_to_patch_rows(const Mat<S>& d, const ConvGeom& g) {
    const Index batch = d.rows();
    if (d.cols() != g.conv_units()) throw DimensionError("factors_to_patch_rows: shape mismatch");
    Mat<S> out(batch * g.patches(), g.out_channels);
    for (Index b = 0; b < batch; ++b)
        for (Index oc = 0; oc < g.out_channels; ++oc)
            for (Index p = 0; p < g.patches(); ++p)
                out(b * g.patches() + p, oc) = d(b, oc * g.patches() + p);
    return out;
}

using IndexMat = Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename S>
struct PoolResult {
    Mat<S> values;   // [batch, pooled_units]
    IndexMat argmax; // flat conv-unit index per pooled unit, first maximum wins
};

/// 2x2 stride-2 max pooling over the conv output. With binary spikes this is
/// a windowed OR; argmax scans the window row-major so ties break to the
/// earliest position.
template <typename S>
PoolResult<S> maxpool_2x2(const Mat<S>& x, const ConvGeom& g) {
    if (x.cols() != g.conv_units()) throw DimensionError("maxpool: shape mismatch");
    const Index batch = x.rows(), ph = g.height / 2, pw = g.width / 2;
    PoolResult<S> out{Mat<S>(batch, g.pooled_units()), IndexMat(batch, g.pooled_units())};
    for (Index b = 0; b < batch; ++b)
        for (Index oc = 0; oc < g.out_channels; ++oc)
            for (Index pr = 0; pr < ph; ++pr)
                for (Index pc = 0; pc < pw; ++pc) {
                    S best = std::numeric_limits<S>::lowest();
                    Index best_idx = 0;
                    for (Index dr = 0; dr < 2; ++dr)
                        for (Index dc = 0; dc < 2; ++dc) {
                            const Index unit = oc * g.patches() +
                                               (2 * pr + dr) * g.width + (2 * pc + dc);
                            if (x(b, unit) > best) {
                                best = x(b, unit);
                                best_idx = unit;
                            }
                        }
                    const Index pooled = oc * ph * pw + pr * pw + pc;
                    out.values(b, pooled) = best;
                    out.argmax(b, pooled) = best_idx;
                }
    return out;
}

/// Gathers x at previously recorded pooling positions.
template <typename S>
Mat<S> gather_units(const Mat<S>& x, const IndexMat& idx) {
    Mat<S> out(idx.rows(), idx.cols());
    for (Index b = 0; b < idx.rows(); ++b)
        for (Index j = 0; j < idx.cols(); ++j) out(b, j) = x(b, idx(b, j));
    return out;
}

}  // namespace tp
