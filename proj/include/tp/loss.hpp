#pragma once

#include <cmath>

#include "tp/tensor.hpp"

namespace tp {

enum class Similarity { Dot, NegEuclidean };
enum class Reduction { Mean, Sum };

/// Row-wise stable softmax, written as explicit per-row loops so the
/// operation order (max, exp, left-to-right sum, divide) is fixed and
/// reproducible across builds.
template <typename S>
Mat<S> softmax_rows(const Mat<S>& x) {
    Mat<S> out(x.rows(), x.cols());
    for (Index i = 0; i < x.rows(); ++i) {
        S m = x(i, 0);
        for (Index j = 1; j < x.cols(); ++j) m = std::max(m, x(i, j));
        S sum = S(0);
        for (Index j = 0; j < x.cols(); ++j) {
            out(i, j) = std::exp(x(i, j) - m);
            sum += out(i, j);
        }
        for (Index j = 0; j < x.cols(); ++j) out(i, j) /= sum;
    }
    return out;
}

/// Row-wise log softmax with the same max-subtracted order as softmax_rows.
template <typename S>
Mat<S> log_softmax_rows(const Mat<S>& x) {
    Mat<S> out(x.rows(), x.cols());
    for (Index i = 0; i < x.rows(); ++i) {
        S m = x(i, 0);
        for (Index j = 1; j < x.cols(); ++j) m = std::max(m, x(i, j));
        S sum = S(0);
        for (Index j = 0; j < x.cols(); ++j) sum += std::exp(x(i, j) - m);
        const S log_sum = std::log(sum);
        for (Index j = 0; j < x.cols(); ++j) out(i, j) = x(i, j) - m - log_sum;
    }
    return out;
}

/// Pairwise trace logits z[b,b'] = sum_j eps[b,j] * eps_trg[b',j].
/// Row b is the input-path sample, column b' the target-path sample, so the
/// diagonal holds the matched pairs the contrastive loss pulls together.
template <typename S>
Mat<S> pairwise_logits(const Mat<S>& eps, const Mat<S>& eps_trg) {
    require_same_shape(eps, eps_trg, "pairwise_logits");
    if (eps.rows() < 2)
        throw ContrastiveBatchError("pairwise logits need a batch of at least 2");
    return eps * eps_trg.transpose();
}

/// Pairwise similarity of previous-layer target traces, the raw scores the
/// soft targets are built from.
template <typename S>
Mat<S> similarity_matrix(const Mat<S>& prev_trg, Similarity sim) {
    const Index b = prev_trg.rows();
    Mat<S> out(b, b);
    if (sim == Similarity::Dot) {
        out = prev_trg * prev_trg.transpose();
    } else {
        for (Index i = 0; i < b; ++i)
            for (Index j = 0; j < b; ++j)
                out(i, j) = -(prev_trg.row(i) - prev_trg.row(j)).norm();
    }
    return out;
}

/// Soft target distribution y = softmax of pairwise similarities of the
/// previous layer's target traces. Rows are distributions over the batch.
template <typename S>
Mat<S> pairwise_targets(const Mat<S>& prev_trg, Similarity sim) {
    if (prev_trg.rows() < 2)
        throw ContrastiveBatchError("pairwise targets need a batch of at least 2");
    return softmax_rows(similarity_matrix(prev_trg, sim));
}

/// Contrastive cross entropy between soft targets y and softmax(z):
///   E = -sum_{b,b'} y[b,b'] * log softmax(z)[b,b']
/// Reduction::Mean divides by the number of rows.
template <typename S>
S local_loss(const Mat<S>& z, const Mat<S>& y, Reduction reduction = Reduction::Mean) {
    require_same_shape(z, y, "local_loss");
    const Mat<S> lsm = log_softmax_rows(z);
    S e = S(0);
    for (Index i = 0; i < z.rows(); ++i)
        for (Index j = 0; j < z.cols(); ++j) e -= y(i, j) * lsm(i, j);
    if (reduction == Reduction::Mean) e /= S(z.rows());
    return e;
}

/// Error signal of the contrastive loss w.r.t. the logits, before any
/// reduction scaling: mod = softmax(z) - y. Rows sum to zero.
template <typename S>
Mat<S> modulatory_signal(const Mat<S>& z, const Mat<S>& y) {
    require_same_shape(z, y, "modulatory_signal");
    return softmax_rows(z) - y;
}

template <typename S>
struct BatchLossSignal {
    S loss;
    Mat<S> mod;  // [batch, batch]
};

/// Logits, loss, and modulatory signal for one layer in one call.
template <typename S>
BatchLossSignal<S> layer_loss_signal(const Mat<S>& eps, const Mat<S>& eps_trg,
                                     const Mat<S>& y, Reduction reduction = Reduction::Mean) {
    const Mat<S> z = pairwise_logits(eps, eps_trg);
    return {local_loss(z, y, reduction), modulatory_signal(z, y)};
}

}  // namespace tp
