#pragma once

#include <limits>
#include <vector>

#include "tp/tensor.hpp"

namespace tp {

/// Mean silhouette score with Euclidean distance: per sample,
/// s = (b - a) / max(a, b) with a the mean intra-class distance and b the
/// smallest mean distance to another class. Samples whose class has a single
/// member are excluded; s is 0 where max(a, b) = 0.
inline double silhouette(const Matd& points, const std::vector<Index>& labels) {
    const Index n = points.rows();
    if (static_cast<Index>(labels.size()) != n)
        throw DimensionError("silhouette: one label per point");

    Index num_classes = 0;
    for (Index lab : labels) {
        if (lab < 0) throw DimensionError("silhouette: negative label");
        num_classes = std::max(num_classes, lab + 1);
    }
    std::vector<Index> class_size(num_classes, 0);
    for (Index lab : labels) ++class_size[lab];
    Index populated = 0;
    for (Index c = 0; c < num_classes; ++c) populated += class_size[c] > 0;
    if (populated < 2) throw ConfigError("silhouette: need at least two classes");

    Matd dist(n, n);
    for (Index i = 0; i < n; ++i) {
        dist(i, i) = 0.0;
        for (Index j = i + 1; j < n; ++j) {
            const double d = (points.row(i) - points.row(j)).norm();
            dist(i, j) = d;
            dist(j, i) = d;
        }
    }

    double total = 0.0;
    Index included = 0;
    for (Index i = 0; i < n; ++i) {
        if (class_size[labels[i]] < 2) continue;
        std::vector<double> sum_per_class(num_classes, 0.0);
        for (Index j = 0; j < n; ++j)
            if (j != i) sum_per_class[labels[j]] += dist(i, j);

        const double a = sum_per_class[labels[i]] / double(class_size[labels[i]] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (Index c = 0; c < num_classes; ++c) {
            if (c == labels[i] || class_size[c] == 0) continue;
            b = std::min(b, sum_per_class[c] / double(class_size[c]));
        }
        const double denom = std::max(a, b);
        total += denom > 0.0 ? (b - a) / denom : 0.0;
        ++included;
    }
    if (included == 0) throw ConfigError("silhouette: no class has two members");
    return total / double(included);
}

}  // namespace tp
