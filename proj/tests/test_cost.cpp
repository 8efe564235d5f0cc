#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "tp/cost.hpp"

using namespace tp;

namespace {

ArchSpec spec(Index input, std::vector<Index> hidden, Index batch, Index steps, Index classes,
              Index tess = 0) {
    ArchSpec s;
    s.input_width = input;
    s.hidden = std::move(hidden);
    s.batch = batch;
    s.steps = steps;
    s.classes = classes;
    s.tess_step = tess;
    return s;
}

}  // namespace

TEST_CASE("MAC counts match hand-expanded single-layer instances") {
    // one layer, F=H=B=T=1: traces 2, logits 1, targets 1, gradients 2 -> 6
    REQUIRE(macs_tp(spec(1, {1}, 1, 1, 1)) == 6);

    // B=2, F=H=1: 2BH=4, B^2 H=4, B^2 F=4, 2 B^2 FH=8 -> 20 per step
    REQUIRE(macs_tp(spec(1, {1}, 2, 1, 1)) == 20);

    // two layers, B=1, T=2: layer1 (F=1,H=2): 4+2+1+4=11,
    // layer2 (F=2,H=3): 6+3+2+12=23; 34 per step, doubled
    REQUIRE(macs_tp(spec(1, {2, 3}, 1, 2, 1)) == 68);

    // staggered baseline, F=H=B=1, O=4: BH+BF+BHO+BH+2BFH = 1+1+4+1+2 = 9
    REQUIRE(macs_tess(spec(1, {1}, 1, 1, 4)) == 9);
}

TEST_CASE("MACs scale linearly in steps and the staggered window") {
    const ArchSpec one = spec(7, {5, 3}, 4, 1, 6);
    const ArchSpec ten = spec(7, {5, 3}, 4, 10, 6);
    REQUIRE(macs_tp(ten) == 10 * macs_tp(one));

    // the baseline only runs for the trailing steps - tess_step steps
    REQUIRE(macs_tess(spec(7, {5, 3}, 4, 10, 6, 4)) == 6 * macs_tess(one));
    REQUIRE(macs_tess(spec(7, {5, 3}, 4, 10, 6, 9)) == macs_tess(one));
}

TEST_CASE("memory formulas match hand-expanded instances") {
    // O=4, B=2, hidden {4, 2}: 4*4 + 4*2*6 = 64
    REQUIRE(memory_tp(spec(9, {4, 2}, 2, 1, 4)) == 64);
    // (3B + O) * sum H = (6 + 1) * 8 = 56
    REQUIRE(memory_tess(spec(9, {5, 3}, 2, 1, 1)) == 56);
    // every extra non-first-layer unit costs 4B scalars
    REQUIRE(memory_tp(spec(9, {4, 3}, 2, 1, 4)) - memory_tp(spec(9, {4, 2}, 2, 1, 4)) == 8);
    // an extra first-layer unit also drags the class projection along
    REQUIRE(memory_tp(spec(9, {5, 2}, 2, 1, 4)) - memory_tp(spec(9, {4, 2}, 2, 1, 4)) == 12);
}

TEST_CASE("the relative memory cost is (3B + O) / 4B") {
    REQUIRE(relative_memory_cost(64, 10) == 202.0 / 256.0);
    REQUIRE(relative_memory_cost(64, 1000) == 1192.0 / 256.0);
    REQUIRE(relative_memory_cost(64, 64) == 1.0);
    REQUIRE(relative_memory_cost(64, 65) > 1.0);
    REQUIRE(relative_memory_cost(64, 63) < 1.0);
    REQUIRE_THROWS_AS(relative_memory_cost(0, 5), ConfigError);
}

TEST_CASE("deep stacks converge to the relative cost limit") {
    // sum H = 100 * H_1 shrinks the class-projection correction below 1%
    const ArchSpec deep = spec(20, {10, 990}, 8, 1, 10);
    const double ratio = double(memory_tess(deep)) / double(memory_tp(deep));
    const double limit = relative_memory_cost(8, 10);
    REQUIRE(std::abs(ratio - limit) / limit < 0.01);
}

TEST_CASE("degenerate and invalid specs") {
    REQUIRE(memory_tp(spec(4, {}, 2, 1, 3)) == 0);
    REQUIRE(memory_tess(spec(4, {}, 2, 1, 3)) == 0);
    REQUIRE(macs_tp(spec(4, {}, 2, 1, 3)) == 0);
    REQUIRE_THROWS_AS(macs_tp(spec(0, {1}, 1, 1, 1)), ConfigError);
    REQUIRE_THROWS_AS(macs_tp(spec(1, {0}, 1, 1, 1)), ConfigError);
    REQUIRE_THROWS_AS(macs_tess(spec(1, {1}, 1, 4, 1, 4)), ConfigError);
    REQUIRE_THROWS_AS(macs_tess(spec(1, {1}, 1, 4, 1, -1)), ConfigError);
}

TEST_CASE("live allocations of real networks match the formula exactly") {
    auto dense = [](Index width) {
        LayerConfig<float> cfg;
        cfg.kind = LayerKind::Dense;
        cfg.width = width;
        cfg.lif = {0.9f, 1.0f, 1.0f};
        cfg.beta = 0.9f;
        return cfg;
    };

    SECTION("shallow dense") {
        auto net = init_network<float>(100, 10, {dense(64), dense(64)}, {}, 1);
        REQUIRE(audit_live_memory(net, 8).delta == 0);
    }
    SECTION("deep narrow dense") {
        auto net = init_network<float>(12, 3, {dense(32), dense(16), dense(8)}, {}, 2);
        REQUIRE(audit_live_memory(net, 3).delta == 0);
    }
    SECTION("recurrent single layer") {
        LayerConfig<float> rec = dense(24);
        rec.kind = LayerKind::DenseRecurrent;
        auto net = init_network<float>(10, 4, {rec}, {}, 3);
        REQUIRE(audit_live_memory(net, 5).delta == 0);
    }
    SECTION("conv stack counts channels times spatial units") {
        LayerConfig<float> conv;
        conv.kind = LayerKind::Conv;
        conv.geom = ConvGeom{1, 4, 4, 3};
        conv.lif = {0.9f, 1.0f, 1.0f};
        conv.beta = 0.9f;
        auto net = init_network<float>(16, 2, {conv}, {}, 4);
        REQUIRE(net.layers[0].units == 48);
        REQUIRE(audit_live_memory(net, 6).delta == 0);
    }
}
