#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "tp/rule.hpp"

using namespace tp;

namespace {

// Quadruple-loop transcription of the update formula, kept independent of the
// GEMM implementation under test.
Matd brute_gradient(const Matd& mod, const Matd& eps, const Matd& eps_trg, const Matd& v,
                    const Matd& v_trg, const Matd& pre_in, const Matd& pre_trg,
                    const LifParams<double>& p, GradTerms terms, Reduction red) {
    const Index batch = mod.rows(), fan_in = pre_in.cols(), post = eps.cols();
    const Matd theta_in = surrogate_derivative(v, p);
    const Matd theta_trg = surrogate_derivative(v_trg, p);
    const double scale = red == Reduction::Mean ? 1.0 / double(batch) : 1.0;
    Matd dw = Matd::Zero(fan_in, post);
    for (Index i = 0; i < fan_in; ++i)
        for (Index j = 0; j < post; ++j)
            for (Index b = 0; b < batch; ++b)
                for (Index bp = 0; bp < batch; ++bp) {
                    if (terms != GradTerms::TargetOnly)
                        dw(i, j) += scale * mod(b, bp) * eps_trg(bp, j) * theta_in(b, j) *
                                    pre_in(b, i);
                    if (terms != GradTerms::InputOnly)
                        dw(i, j) += scale * mod(b, bp) * eps(b, j) * theta_trg(bp, j) *
                                    pre_trg(bp, i);
                }
    return dw;
}

}  // namespace

TEST_CASE("softmax rows are normalized and ordered") {
    Matd x(2, 3);
    x << 1.0, 2.0, 3.0, -5.0, 0.0, 5.0;
    Matd p = softmax_rows(x);
    for (Index i = 0; i < 2; ++i) CHECK(p.row(i).sum() == Catch::Approx(1.0));
    CHECK(p(0, 2) > p(0, 1));
    CHECK(p(0, 1) > p(0, 0));
}

TEST_CASE("softmax is shift invariant and stable at large magnitudes") {
    Matd x(1, 3);
    x << 1000.0, 1001.0, 999.0;
    Matd p = softmax_rows(x);
    Matd x0(1, 3);
    x0 << 0.0, 1.0, -1.0;
    Matd p0 = softmax_rows(x0);
    for (Index j = 0; j < 3; ++j) CHECK(p(0, j) == Catch::Approx(p0(0, j)));
    CHECK(p.allFinite());
}

TEST_CASE("log softmax agrees with log of softmax") {
    Rng rng(5);
    Matd x = uniform_matrix<double>(rng, 4, 4, -3.0, 3.0);
    Matd lsm = log_softmax_rows(x);
    Matd sm = softmax_rows(x);
    for (Index i = 0; i < x.rows(); ++i)
        for (Index j = 0; j < x.cols(); ++j)
            CHECK(lsm(i, j) == Catch::Approx(std::log(sm(i, j))));
}

TEST_CASE("pairwise logits of orthonormal traces give the identity") {
    Matd eye = Matd::Identity(2, 2);
    CHECK(pairwise_logits(eye, eye) == eye);
}

TEST_CASE("pairwise logits match the hand product") {
    Matd eps(2, 2), eps_trg(2, 2), want(2, 2);
    eps << 1, 2, 0, 1;
    eps_trg << 1, 0, 1, 1;
    want << 1, 3, 0, 1;
    CHECK(pairwise_logits(eps, eps_trg) == want);
}

TEST_CASE("a batch of one is rejected") {
    Matd one = Matd::Ones(1, 3);
    CHECK_THROWS_AS(pairwise_logits(one, one), ContrastiveBatchError);
    CHECK_THROWS_AS(pairwise_targets(one, Similarity::Dot), ContrastiveBatchError);
}

TEST_CASE("targets from one-hot class traces") {
    Matd prev = Matd::Identity(2, 2);
    Matd y = pairwise_targets(prev, Similarity::Dot);
    const double e = std::exp(1.0);
    CHECK(y(0, 0) == Catch::Approx(e / (e + 1)));
    CHECK(y(0, 1) == Catch::Approx(1 / (e + 1)));
    CHECK(y(1, 0) == Catch::Approx(1 / (e + 1)));
    CHECK(y(1, 1) == Catch::Approx(e / (e + 1)));
}

TEST_CASE("identical rows give uniform targets") {
    Matd prev(3, 4);
    prev << 1, 0, 2, 0, 1, 0, 2, 0, 1, 0, 2, 0;
    Matd y = pairwise_targets(prev, Similarity::Dot);
    for (Index i = 0; i < 3; ++i)
        for (Index j = 0; j < 3; ++j) CHECK(y(i, j) == Catch::Approx(1.0 / 3.0));
}

TEST_CASE("target rows sum to one for random traces") {
    Rng rng(17);
    for (auto sim : {Similarity::Dot, Similarity::NegEuclidean}) {
        Matd prev = uniform_matrix<double>(rng, 5, 7, 0.0, 3.0);
        Matd y = pairwise_targets(prev, sim);
        for (Index i = 0; i < 5; ++i) CHECK(y.row(i).sum() == Catch::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("euclidean similarity favors the nearest row") {
    Matd prev(2, 2);
    prev << 0, 0, 3, 4;
    Matd y = pairwise_targets(prev, Similarity::NegEuclidean);
    const double expect_self = 1.0 / (1.0 + std::exp(-5.0));
    CHECK(y(0, 0) == Catch::Approx(expect_self));
    CHECK(y(0, 1) == Catch::Approx(1.0 - expect_self));
    CHECK(y(1, 1) == Catch::Approx(expect_self));
}

TEST_CASE("loss at matching distributions equals the target entropy") {
    Rng rng(23);
    Matd z = uniform_matrix<double>(rng, 3, 3, -1.0, 1.0);
    Matd y = softmax_rows(z);
    double entropy = 0.0;
    for (Index i = 0; i < 3; ++i)
        for (Index j = 0; j < 3; ++j) entropy -= y(i, j) * std::log(y(i, j));
    CHECK(local_loss(z, y, Reduction::Sum) == Catch::Approx(entropy));
    CHECK(local_loss(z, y, Reduction::Mean) == Catch::Approx(entropy / 3.0));
}

TEST_CASE("uniform logits against identity targets cost log 2") {
    Matd z = Matd::Zero(2, 2);
    Matd y = Matd::Identity(2, 2);
    CHECK(local_loss(z, y, Reduction::Mean) == Catch::Approx(std::log(2.0)));
    CHECK(local_loss(z, y, Reduction::Sum) == Catch::Approx(2.0 * std::log(2.0)));
}

TEST_CASE("loss never drops below the target entropy") {
    Rng rng(29);
    for (int k = 0; k < 20; ++k) {
        Matd z = uniform_matrix<double>(rng, 4, 4, -4.0, 4.0);
        Matd yz = uniform_matrix<double>(rng, 4, 4, -4.0, 4.0);
        Matd y = softmax_rows(yz);
        double entropy = 0.0;
        for (Index i = 0; i < 4; ++i)
            for (Index j = 0; j < 4; ++j) entropy -= y(i, j) * std::log(y(i, j));
        CHECK(local_loss(z, y, Reduction::Sum) >= entropy - 1e-9);
    }
}

TEST_CASE("modulatory signal vanishes at the loss minimum") {
    Rng rng(31);
    Matd z = uniform_matrix<double>(rng, 3, 3, -2.0, 2.0);
    Matd y = softmax_rows(z);
    CHECK(modulatory_signal(z, y).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("modulatory signal of uniform logits against identity targets") {
    Matd z = Matd::Zero(2, 2);
    Matd y = Matd::Identity(2, 2);
    Matd want(2, 2);
    want << -0.5, 0.5, 0.5, -0.5;
    Matd mod = modulatory_signal(z, y);
    for (Index i = 0; i < 2; ++i)
        for (Index j = 0; j < 2; ++j) CHECK(mod(i, j) == Catch::Approx(want(i, j)));
}

TEST_CASE("modulatory rows sum to zero") {
    Rng rng(37);
    Matd z = uniform_matrix<double>(rng, 5, 5, -3.0, 3.0);
    Matd y = pairwise_targets(uniform_matrix<double>(rng, 5, 6, 0.0, 2.0), Similarity::Dot);
    Matd mod = modulatory_signal(z, y);
    for (Index i = 0; i < 5; ++i) CHECK(std::abs(mod.row(i).sum()) < 1e-6);
}

TEST_CASE("zero contrast or silent presynapse gives a zero gradient") {
    LifParams<double> p{0.9, 1.0, 1.0};
    Rng rng(41);
    auto trace = TraceState<double>::zero(2, 3, 0.5);
    trace.eps = uniform_matrix<double>(rng, 2, 3, 0.0, 2.0);
    trace.eps_trg = uniform_matrix<double>(rng, 2, 3, 0.0, 2.0);
    Matd v = uniform_matrix<double>(rng, 2, 3, 0.0, 1.5);
    Matd pre = bernoulli_matrix<double>(rng, 2, 4, 0.5);

    Matd zero_mod = Matd::Zero(2, 2);
    CHECK(layer_gradient(zero_mod, trace, v, v, pre, pre, p).isZero());

    Matd mod = uniform_matrix<double>(rng, 2, 2, -1.0, 1.0);
    Matd silent = Matd::Zero(2, 4);
    CHECK(layer_gradient(mod, trace, v, v, silent, silent, p).isZero());
}

TEST_CASE("gradient matches the quadruple-loop reference") {
    LifParams<double> p{0.8, 1.0, 1.3};
    Rng rng(43);
    for (auto terms : {GradTerms::Both, GradTerms::InputOnly, GradTerms::TargetOnly}) {
        for (auto red : {Reduction::Mean, Reduction::Sum}) {
            const Index batch = 3, fan_in = 4, post = 2;
            auto trace = TraceState<double>::zero(batch, post, 0.5);
            trace.eps = uniform_matrix<double>(rng, batch, post, 0.0, 2.0);
            trace.eps_trg = uniform_matrix<double>(rng, batch, post, 0.0, 2.0);
            Matd v = uniform_matrix<double>(rng, batch, post, -0.5, 1.5);
            Matd v_trg = uniform_matrix<double>(rng, batch, post, -0.5, 1.5);
            Matd pre_in = bernoulli_matrix<double>(rng, batch, fan_in, 0.5);
            Matd pre_trg = bernoulli_matrix<double>(rng, batch, fan_in, 0.5);
            Matd mod = uniform_matrix<double>(rng, batch, batch, -1.0, 1.0);

            Matd got = layer_gradient(mod, trace, v, v_trg, pre_in, pre_trg, p, terms, red);
            Matd want =
                brute_gradient(mod, trace.eps, trace.eps_trg, v, v_trg, pre_in, pre_trg, p,
                               terms, red);
            REQUIRE(got.rows() == want.rows());
            CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
        }
    }
}

TEST_CASE("sum reduction scales the mean gradient by the batch size") {
    LifParams<double> p{0.8, 1.0, 1.0};
    Rng rng(47);
    const Index batch = 4;
    auto trace = TraceState<double>::zero(batch, 3, 0.5);
    trace.eps = uniform_matrix<double>(rng, batch, 3, 0.0, 2.0);
    trace.eps_trg = uniform_matrix<double>(rng, batch, 3, 0.0, 2.0);
    Matd v = uniform_matrix<double>(rng, batch, 3, -0.5, 1.5);
    Matd pre = bernoulli_matrix<double>(rng, batch, 5, 0.5);
    Matd mod = uniform_matrix<double>(rng, batch, batch, -1.0, 1.0);
    Matd mean_g = layer_gradient(mod, trace, v, v, pre, pre, p, GradTerms::Both, Reduction::Mean);
    Matd sum_g = layer_gradient(mod, trace, v, v, pre, pre, p, GradTerms::Both, Reduction::Sum);
    CHECK((sum_g - double(batch) * mean_g).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("diagonal recurrent gradient equals the diagonal of the full gradient") {
    LifParams<double> p{0.8, 1.0, 1.0};
    Rng rng(53);
    const Index batch = 3, n = 4;
    auto trace = TraceState<double>::zero(batch, n, 0.5);
    trace.eps = uniform_matrix<double>(rng, batch, n, 0.0, 2.0);
    trace.eps_trg = uniform_matrix<double>(rng, batch, n, 0.0, 2.0);
    Matd v = uniform_matrix<double>(rng, batch, n, -0.5, 1.5);
    Matd v_trg = uniform_matrix<double>(rng, batch, n, -0.5, 1.5);
    Matd pre_in = bernoulli_matrix<double>(rng, batch, n, 0.5);
    Matd pre_trg = bernoulli_matrix<double>(rng, batch, n, 0.5);
    Matd mod = uniform_matrix<double>(rng, batch, batch, -1.0, 1.0);

    auto f = post_factors(mod, trace.eps, trace.eps_trg, v, v_trg, p);
    Matd full = layer_gradient(pre_in, pre_trg, f);
    Vec<double> diag = recurrent_diag_gradient(pre_in, pre_trg, f);
    CHECK((diag - full.diagonal()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("weight update is a plain scaled subtraction") {
    Matd w(2, 2);
    w << 1, 2, 3, 4;
    Matd w0 = w;
    Matd zero = Matd::Zero(2, 2);
    apply_update(w, zero, 1e-4);
    CHECK(w == w0);

    Matd g = Matd::Ones(2, 2);
    apply_update(w, g, 1e-4);
    CHECK(w(0, 0) == Catch::Approx(1.0 - 1e-4));
    apply_update(w, g, 1e-4);
    CHECK(w(1, 1) == Catch::Approx(4.0 - 2e-4));
}

TEST_CASE("layer loss signal bundles loss and modulation consistently") {
    Rng rng(59);
    Matd eps = uniform_matrix<double>(rng, 3, 4, 0.0, 2.0);
    Matd eps_trg = uniform_matrix<double>(rng, 3, 4, 0.0, 2.0);
    Matd y = pairwise_targets(uniform_matrix<double>(rng, 3, 2, 0.0, 2.0), Similarity::Dot);
    auto sig = layer_loss_signal(eps, eps_trg, y);
    Matd z = pairwise_logits(eps, eps_trg);
    CHECK(sig.loss == Catch::Approx(local_loss(z, y)));
    CHECK((sig.mod - modulatory_signal(z, y)).cwiseAbs().maxCoeff() < 1e-15);
}
