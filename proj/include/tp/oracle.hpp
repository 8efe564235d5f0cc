#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tp/lif.hpp"
#include "tp/loss.hpp"
#include "tp/rule.hpp"
#include "tp/tensor.hpp"
#include "tp/traces.hpp"

namespace tp {

/// Gradient oracle. Builds a one-step model identical to the training step
/// except that the spike nonlinearity is the smooth surrogate_antiderivative,
/// whose exact derivative is the surrogate used by the learning rule. On that
/// model the rule's three-factor formula is the true gradient of the local
/// loss, so central finite differences give an independent check of the whole
/// gradient path. Everything here runs in double.

enum class OracleVariant { Dense, Recurrent, LayerOneFixedS, LayerOneLearnS };

struct SmoothedInstance {
    OracleVariant variant = OracleVariant::Dense;
    LifParams<double> params;
    double beta = 0.9;

    // Frozen state entering the step. All [batch, post] unless noted.
    Matd v0, v0_trg;            // membrane potentials
    Matd eps0, eps0_trg;        // traces
    Matd s_prev_in, s_prev_trg; // previous spikes driving the reset
    Matd pre_in, pre_trg;       // presynaptic spikes [batch, fan_in]
    Matd own_prev_in, own_prev_trg; // recurrent presynaptic spikes, Recurrent only
    Matd labels;                // one-hot labels [batch, classes], layer-one only
    Matd y;                     // frozen soft targets [batch, batch]

    // Weights the gradient is taken in.
    Matd w;       // [fan_in, post]
    Matd r;       // [post, post], Recurrent only
    Matd s_proj;  // [classes, post], layer-one only

    bool layer_one() const {
        return variant == OracleVariant::LayerOneFixedS ||
               variant == OracleVariant::LayerOneLearnS;
    }
};

struct SmoothedForward {
    Matd v, v_trg;
    TraceState<double> trace;
    Matd z, mod;
    double loss;
};

inline SmoothedForward smoothed_forward(const SmoothedInstance& in) {
    const auto& p = in.params;
    Matd v = p.alpha * in.v0 + in.pre_in * in.w - p.v_th * in.s_prev_in;
    Matd v_trg = p.alpha * in.v0_trg - p.v_th * in.s_prev_trg;
    if (in.layer_one())
        v_trg += in.labels * in.s_proj;
    else
        v_trg += in.pre_trg * in.w;
    if (in.variant == OracleVariant::Recurrent) {
        v += in.own_prev_in * in.r;
        v_trg += in.own_prev_trg * in.r;
    }

    TraceState<double> trace{in.beta * in.eps0 + surrogate_antiderivative(v, p),
                             in.beta * in.eps0_trg + surrogate_antiderivative(v_trg, p),
                             in.beta};
    Matd z = trace.eps * trace.eps_trg.transpose();
    return {v, v_trg, trace, z, modulatory_signal(z, in.y), local_loss(z, in.y)};
}

inline double smoothed_loss(const SmoothedInstance& in) { return smoothed_forward(in).loss; }

struct AnalyticGrads {
    Matd dw, dr, ds;  // dr / ds empty when the variant has no such weight
};

inline AnalyticGrads analytic_gradients(const SmoothedInstance& in) {
    const SmoothedForward f = smoothed_forward(in);
    const RuleFactors<double> factors =
        post_factors(f.mod, f.trace.eps, f.trace.eps_trg, f.v, f.v_trg, in.params);

    AnalyticGrads g;
    if (in.layer_one()) {
        g.dw = layer_gradient(in.pre_in, Matd(), factors, GradTerms::InputOnly);
        if (in.variant == OracleVariant::LayerOneLearnS)
            g.ds = layer_gradient(Matd(), in.labels, factors, GradTerms::TargetOnly);
    } else {
        g.dw = layer_gradient(in.pre_in, in.pre_trg, factors, GradTerms::Both);
    }
    if (in.variant == OracleVariant::Recurrent)
        g.dr = layer_gradient(in.own_prev_in, in.own_prev_trg, factors, GradTerms::Both);
    return g;
}

/// Central differences through an arbitrary loss closure, one entry at a time.
template <typename F>
Matd finite_difference_grad(Matd& w, F&& loss_fn, double h = 1e-5) {
    Matd g(w.rows(), w.cols());
    for (Index i = 0; i < w.rows(); ++i)
        for (Index j = 0; j < w.cols(); ++j) {
            const double saved = w(i, j);
            w(i, j) = saved + h;
            const double up = loss_fn();
            w(i, j) = saved - h;
            const double down = loss_fn();
            w(i, j) = saved;
            g(i, j) = (up - down) / (2 * h);
        }
    return g;
}

/// Worst elementwise relative error |a−n| / max(|a|, |n|, 1e−8).
inline double relative_error(const Matd& a, const Matd& n) {
    require_same_shape(a, n, "relative_error");
    double worst = 0.0;
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j) {
            const double denom = std::max({std::abs(a(i, j)), std::abs(n(i, j)), 1e-8});
            worst = std::max(worst, std::abs(a(i, j) - n(i, j)) / denom);
        }
    return worst;
}

inline SmoothedInstance random_instance(Rng& rng, OracleVariant variant, Similarity sim) {
    std::uniform_int_distribution<int> batch_d(2, 4), post_d(2, 8), fan_d(2, 8), cls_d(2, 4);
    SmoothedInstance in;
    in.variant = variant;
    in.params = {0.9, 1.0, 1.0};
    in.beta = 0.9;

    const Index batch = batch_d(rng), post = post_d(rng), fan_in = fan_d(rng);
    in.v0 = uniform_matrix<double>(rng, batch, post, -0.5, 1.5);
    in.v0_trg = uniform_matrix<double>(rng, batch, post, -0.5, 1.5);
    in.eps0 = uniform_matrix<double>(rng, batch, post, 0.0, 2.0);
    in.eps0_trg = uniform_matrix<double>(rng, batch, post, 0.0, 2.0);
    in.s_prev_in = bernoulli_matrix<double>(rng, batch, post, 0.3);
    in.s_prev_trg = bernoulli_matrix<double>(rng, batch, post, 0.3);
    in.pre_in = bernoulli_matrix<double>(rng, batch, fan_in, 0.5);
    in.pre_trg = bernoulli_matrix<double>(rng, batch, fan_in, 0.5);
    in.w = uniform_matrix<double>(rng, fan_in, post, -0.5, 0.5);

    if (variant == OracleVariant::Recurrent) {
        in.own_prev_in = bernoulli_matrix<double>(rng, batch, post, 0.5);
        in.own_prev_trg = bernoulli_matrix<double>(rng, batch, post, 0.5);
        in.r = uniform_matrix<double>(rng, post, post, -0.3, 0.3);
    }
    if (in.layer_one()) {
        const Index classes = cls_d(rng);
        std::uniform_int_distribution<Index> lab(0, classes - 1);
        in.labels = Matd::Zero(batch, classes);
        for (Index b = 0; b < batch; ++b) in.labels(b, lab(rng)) = 1.0;
        in.s_proj = uniform_matrix<double>(rng, classes, post, -0.5, 0.5);
    }

    Matd prev_trg = uniform_matrix<double>(rng, batch, fan_in, 0.0, 2.0);
    in.y = pairwise_targets(prev_trg, sim);
    return in;
}

struct GradcheckReport {
    int instances = 0;
    double worst = 0.0;
    bool pass = false;
    std::vector<double> per_instance;   // max relative error of each instance
    std::vector<std::string> labels;    // variant/similarity of each instance
};

inline const char* variant_name(OracleVariant v) {
    switch (v) {
        case OracleVariant::Dense: return "dense";
        case OracleVariant::Recurrent: return "recurrent";
        case OracleVariant::LayerOneFixedS: return "layer-1 fixed projection";
        case OracleVariant::LayerOneLearnS: return "layer-1 learned projection";
    }
    return "?";
}

/// Checks every weight of `instances` random smoothed models against central
/// finite differences, cycling through all variants and both similarities.
inline GradcheckReport run_gradcheck(int instances, unsigned seed, double tol = 1e-4,
                                     double h = 1e-5) {
    static constexpr OracleVariant kVariants[] = {
        OracleVariant::Dense, OracleVariant::Recurrent, OracleVariant::LayerOneFixedS,
        OracleVariant::LayerOneLearnS};
    static constexpr Similarity kSims[] = {Similarity::Dot, Similarity::NegEuclidean};

    Rng rng(seed);
    GradcheckReport report;
    report.instances = instances;
    report.per_instance.reserve(instances);
    for (int k = 0; k < instances; ++k) {
        const OracleVariant variant = kVariants[k % 4];
        const Similarity sim = kSims[(k / 4) % 2];
        SmoothedInstance in = random_instance(rng, variant, sim);
        report.labels.push_back(std::string(variant_name(variant)) +
                                (sim == Similarity::Dot ? ", dot" : ", neg-euclidean"));
        const AnalyticGrads g = analytic_gradients(in);
        auto loss = [&in] { return smoothed_loss(in); };

        double err = relative_error(g.dw, finite_difference_grad(in.w, loss, h));
        if (g.dr.size() > 0)
            err = std::max(err, relative_error(g.dr, finite_difference_grad(in.r, loss, h)));
        if (g.ds.size() > 0)
            err = std::max(err,
                           relative_error(g.ds, finite_difference_grad(in.s_proj, loss, h)));
        report.per_instance.push_back(err);
        report.worst = std::max(report.worst, err);
    }
    report.pass = report.worst < tol;
    return report;
}

}  // namespace tp
