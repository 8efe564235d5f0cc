#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "tp/lif.hpp"
#include "tp/traces.hpp"

using namespace tp;

namespace {

Matf scalar_mat(float x) {
    Matf m(1, 1);
    m(0, 0) = x;
    return m;
}

}  // namespace

TEST_CASE("membrane update integrates, decays, and stays subthreshold") {
    LifParams<float> p{0.9f, 1.0f, 1.0f};
    MembraneState<float> st{scalar_mat(0.5f), scalar_mat(0.0f)};
    auto out = lif_step(st, scalar_mat(0.3f), nullptr, p);
    CHECK(out.state.v(0, 0) == Catch::Approx(0.75f));
    CHECK(out.spikes(0, 0) == 0.0f);
}

TEST_CASE("zero state with zero input is a fixed point") {
    LifParams<float> p{0.3f, 1.0f, 1.0f};
    auto st = MembraneState<float>::zero(2, 3);
    Matf in = Matf::Zero(2, 3);
    auto out = lif_step(st, in, nullptr, p);
    CHECK(out.state.v.isZero());
    CHECK(out.spikes.isZero());
}

TEST_CASE("soft reset subtracts the threshold after a spike") {
    LifParams<float> p{0.5f, 1.0f, 1.0f};
    MembraneState<float> st{scalar_mat(2.0f), scalar_mat(1.0f)};
    auto out = lif_step(st, scalar_mat(0.0f), nullptr, p);
    CHECK(out.state.v(0, 0) == Catch::Approx(0.0f));
    CHECK(out.spikes(0, 0) == 0.0f);
}

TEST_CASE("crossing at exactly the threshold fires") {
    LifParams<float> p{0.0f, 1.0f, 1.0f};
    auto st = MembraneState<float>::zero(1, 2);
    Matf in(1, 2);
    in << 1.0f, 0.999f;
    auto out = lif_step(st, in, nullptr, p);
    CHECK(out.spikes(0, 0) == 1.0f);
    CHECK(out.spikes(0, 1) == 0.0f);
}

TEST_CASE("recurrent current adds into the membrane") {
    LifParams<float> p{1.0f, 10.0f, 1.0f};
    MembraneState<float> st{scalar_mat(1.0f), scalar_mat(0.0f)};
    Matf rec = scalar_mat(0.25f);
    auto out = lif_step(st, scalar_mat(0.5f), &rec, p);
    CHECK(out.state.v(0, 0) == Catch::Approx(1.75f));
}

TEST_CASE("alpha=0 makes the neuron memoryless") {
    LifParams<float> p{0.0f, 1.0f, 1.0f};
    Rng rng(7);
    Matf in = uniform_matrix<float>(rng, 3, 4, -0.5f, 0.5f);
    MembraneState<float> a{uniform_matrix<float>(rng, 3, 4, -2.0f, 2.0f), Matf::Zero(3, 4)};
    MembraneState<float> b = MembraneState<float>::zero(3, 4);
    auto out_a = lif_step(a, in, nullptr, p);
    auto out_b = lif_step(b, in, nullptr, p);
    CHECK(out_a.state.v == out_b.state.v);
}

TEST_CASE("spikes are exactly binary") {
    LifParams<float> p{0.9f, 0.3f, 1.0f};
    Rng rng(11);
    auto st = MembraneState<float>::zero(4, 8);
    for (int t = 0; t < 20; ++t) {
        Matf in = uniform_matrix<float>(rng, 4, 8, -0.2f, 0.6f);
        auto out = lif_step(st, in, nullptr, p);
        st = out.state;
        for (Index i = 0; i < out.spikes.rows(); ++i)
            for (Index j = 0; j < out.spikes.cols(); ++j) {
                float s = out.spikes(i, j);
                REQUIRE((s == 0.0f || s == 1.0f));
            }
        REQUIRE(st.v.allFinite());
    }
}

TEST_CASE("lif_step rejects bad shapes and non-finite input") {
    LifParams<float> p;
    auto st = MembraneState<float>::zero(2, 3);
    Matf wide_in = Matf::Zero(2, 4);
    CHECK_THROWS_AS(lif_step(st, wide_in, nullptr, p), DimensionError);
    Matf bad = Matf::Zero(2, 3);
    bad(0, 0) = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(lif_step(st, bad, nullptr, p), NumericError);
}

TEST_CASE("lif params are validated") {
    LifParams<float> p;
    p.alpha = 1.5f;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = {};
    p.v_th = 0.0f;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = {};
    p.surrogate_scale = -1.0f;
    CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("spike derivative peaks at the threshold") {
    LifParams<double> p{0.9, 1.0, 1.0};
    Matd v(1, 3);
    v << 1.0, 1.0 + 2.0 / std::numbers::pi, 1e6;
    Matd d = surrogate_derivative(v, p);
    CHECK(d(0, 0) == Catch::Approx(1.0));
    CHECK(d(0, 1) == Catch::Approx(0.5));
    CHECK(d(0, 2) < 1e-11);
}

TEST_CASE("spike derivative is even around the threshold and positive") {
    LifParams<double> p{0.9, 0.7, 2.5};
    Matd lo(1, 50), hi(1, 50);
    for (int k = 0; k < 50; ++k) {
        double u = 0.1 * (k + 1);
        lo(0, k) = p.v_th - u;
        hi(0, k) = p.v_th + u;
    }
    Matd dl = surrogate_derivative(lo, p);
    Matd dh = surrogate_derivative(hi, p);
    for (int k = 0; k < 50; ++k) {
        CHECK(dl(0, k) == Catch::Approx(dh(0, k)));
        CHECK(dl(0, k) > 0.0);
        CHECK(dl(0, k) <= p.surrogate_scale);
    }
}

TEST_CASE("smoothed spike function is odd and differentiates to the derivative") {
    LifParams<double> p{0.9, 1.0, 1.0};
    CHECK(surrogate_antiderivative(scalar_mat(1.0f).cast<double>().eval(), p)(0, 0) ==
          Catch::Approx(0.0).margin(1e-15));

    Matd u_pos(1, 5), u_neg(1, 5);
    u_pos << 1.1, 1.5, 2.0, 3.0, 5.0;
    u_neg = 2.0 * p.v_th - u_pos.array();
    Matd sp = surrogate_antiderivative(u_pos, p);
    Matd sn = surrogate_antiderivative(u_neg, p);
    for (int k = 0; k < 5; ++k) CHECK(sp(0, k) == Catch::Approx(-sn(0, k)));
}

TEST_CASE("smoothed spike derivative matches on a dense grid") {
    for (double scale : {1.0, 0.5, 3.0}) {
        LifParams<double> p{0.9, 1.0, scale};
        const double h = 1e-6;
        double worst = 0.0;
        for (int k = 0; k < 1000; ++k) {
            double v = -10.0 + 20.0 * k / 999.0;
            Matd vp = scalar_mat(0.0f).cast<double>(), vm = vp, vc = vp;
            vp(0, 0) = v + h;
            vm(0, 0) = v - h;
            vc(0, 0) = v;
            double num = (surrogate_antiderivative(vp, p)(0, 0) -
                          surrogate_antiderivative(vm, p)(0, 0)) /
                         (2 * h);
            double ana = surrogate_derivative(vc, p)(0, 0);
            worst = std::max(worst, std::abs(num - ana) / std::max(std::abs(ana), 1e-12));
        }
        CHECK(worst < 1e-6);
    }
}

TEST_CASE("trace update accumulates decayed history") {
    auto t = TraceState<float>::zero(1, 1, 0.5f);
    t.eps(0, 0) = 1.0f;
    auto t2 = update_traces(t, scalar_mat(1.0f), scalar_mat(0.0f));
    CHECK(t2.eps(0, 0) == Catch::Approx(1.5f));
    CHECK(t2.eps_trg(0, 0) == 0.0f);
}

TEST_CASE("beta=0 trace copies the spikes") {
    auto t = TraceState<float>::zero(2, 2, 0.0f);
    t.eps.setConstant(9.0f);
    Matf s(2, 2);
    s << 1, 0, 0, 1;
    auto t2 = update_traces(t, s, s);
    CHECK(t2.eps == s);
    CHECK(t2.eps_trg == s);
}

TEST_CASE("constant spiking follows the geometric series") {
    const float beta = 0.8f;
    auto t = TraceState<float>::zero(1, 1, beta);
    Matf one = scalar_mat(1.0f);
    for (int steps : {1, 2, 5, 13}) {
        t = TraceState<float>::zero(1, 1, beta);
        for (int k = 0; k < steps; ++k) t = update_traces(t, one, one);
        float expected = (1.0f - std::pow(beta, float(steps))) / (1.0f - beta);
        CHECK(t.eps(0, 0) == Catch::Approx(expected));
        CHECK(t.eps_trg(0, 0) == Catch::Approx(expected));
    }
}

TEST_CASE("traces stay inside the geometric bound") {
    const float beta = 0.95f;
    auto t = TraceState<float>::zero(3, 5, beta);
    Rng rng(3);
    for (int k = 0; k < 400; ++k) {
        Matf s_in = bernoulli_matrix<float>(rng, 3, 5, 0.7);
        Matf s_trg = bernoulli_matrix<float>(rng, 3, 5, 0.7);
        t = update_traces(t, s_in, s_trg);
        REQUIRE(t.eps.minCoeff() >= 0.0f);
        REQUIRE(t.eps.maxCoeff() <= 1.0f / (1.0f - beta));
        REQUIRE(t.eps_trg.maxCoeff() <= 1.0f / (1.0f - beta));
    }
}

TEST_CASE("trace shapes are validated") {
    auto t = TraceState<float>::zero(2, 3, 0.5f);
    Matf wide = Matf::Zero(2, 4), ok = Matf::Zero(2, 3);
    CHECK_THROWS_AS(update_traces(t, wide, ok), DimensionError);
    CHECK_THROWS_AS(TraceState<float>::zero(1, 1, 1.0f), ConfigError);
}
