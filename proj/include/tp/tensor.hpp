#pragma once

#include <Eigen/Dense>
#include <random>

#include "tp/errors.hpp"

namespace tp {

using Index = Eigen::Index;

// Row-major throughout: batch rows, feature columns, and raw payloads
// serialize in the same order the file formats use.
template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using Matf = Mat<float>;
using Matd = Mat<double>;
using Vecf = Vec<float>;
using Vecd = Vec<double>;

using Rng = std::mt19937;

template <typename S>
Mat<S> uniform_matrix(Rng& rng, Index rows, Index cols, S lo, S hi) {
    std::uniform_real_distribution<S> dist(lo, hi);
    Mat<S> m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
    return m;
}

template <typename S>
Mat<S> bernoulli_matrix(Rng& rng, Index rows, Index cols, double p) {
    std::bernoulli_distribution dist(p);
    Mat<S> m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = dist(rng) ? S(1) : S(0);
    return m;
}

template <typename S>
void require_finite(const Mat<S>& m, const char* what) {
    if (!m.allFinite()) throw NumericError(std::string(what) + ": non-finite values");
}

template <typename S>
void require_same_shape(const Mat<S>& a, const Mat<S>& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError(std::string(what) + ": shape mismatch (" + std::to_string(a.rows()) +
                             "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                             "x" + std::to_string(b.cols()) + ")");
}

}  // namespace tp
