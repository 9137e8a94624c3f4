#include <doctest.h>

#include <set>

#include "../support/synth.hpp"
#include "perpsieve/costs.hpp"
#include "perpsieve/error.hpp"

using namespace perpsieve;

TEST_CASE("zero turnover costs nothing but funding") {
    const CostBreakdown c = bar_costs(1.0, 1.0, 0.0, 4.0, CostProfile{});
    CHECK(c.fee == 0.0);
    CHECK(c.slip == 0.0);
}

TEST_CASE("baseline fee and slippage on unit turnover") {
    const CostBreakdown c = bar_costs(0.0, 1.0, 0.0, 4.0, CostProfile{});
    CHECK(c.fee == doctest::Approx(0.0004).epsilon(1e-14));
    CHECK(c.slip == doctest::Approx(0.0002).epsilon(1e-14));
}

TEST_CASE("funding scales with bar length") {
    const CostBreakdown c = bar_costs(2.0, 2.0, 0.0001, 4.0, CostProfile{});
    CHECK(c.funding == doctest::Approx(2 * 0.0001 * (4.0 / 8.0)).epsilon(1e-14));
    CHECK(c.funding == doctest::Approx(0.0001).epsilon(1e-14));
    // shorts receive positive funding
    CHECK(bar_costs(-1.0, -1.0, 0.0001, 4.0, CostProfile{}).funding < 0.0);
}

TEST_CASE("cost properties") {
    perpsieve::Rng rng(11);
    for (int i = 0; i < 500; ++i) {
        CostProfile p = fixtures::random_profile(rng);
        const double a = rng.uniform(-5, 5), b = rng.uniform(-5, 5), fr = rng.uniform(-0.003, 0.003);
        const CostBreakdown c = bar_costs(a, b, fr, 4.0, p);
        CHECK(c.fee >= 0.0);
        CHECK(c.slip >= 0.0);
        // doubling turnover doubles fee and slip exactly
        const CostBreakdown d = bar_costs(2 * a, 2 * b, fr, 4.0, p);
        CHECK(d.fee == 2 * c.fee);
        CHECK(d.slip == 2 * c.slip);
        if (p.funding_mode == FundingMode::Off) CHECK(c.funding == 0.0);
        if (p.funding_mode != FundingMode::Off && b * fr != 0.0) CHECK((c.funding > 0.0) == (b * fr > 0.0));
        CostProfile off = p;
        off.funding_mode = FundingMode::Off;
        CHECK(bar_costs(a, b, fr, 4.0, off).funding == 0.0);
    }
}

TEST_CASE("scenario grid") {
    const auto grid = scenario_grid(CostProfile{});
    REQUIRE(grid.size() == 9);
    CHECK(grid.front().taker_fee_bps == 3.0);
    CHECK(grid.front().funding_multiplier == 0.5);
    CHECK(grid[1].taker_fee_bps == 3.0);
    CHECK(grid[1].funding_multiplier == 1.0);
    CHECK(grid.back().taker_fee_bps == 6.0);
    CHECK(grid.back().funding_multiplier == 1.5);
    std::set<std::string> labels;
    for (const auto& s : grid) labels.insert(s.label);
    CHECK(labels.size() == 9);
    // a scenario only overrides fee and funding multiplier
    const CostProfile applied = grid[4].apply(CostProfile{});
    CHECK(applied.taker_fee_bps == 4.0);
    CHECK(applied.base_slippage_bps == 2.0);
}

TEST_CASE("higher fee scenario never lowers the fee") {
    const auto grid = scenario_grid(CostProfile{});
    for (std::size_t i = 0; i + 3 < grid.size(); ++i) {
        const double lo = bar_costs(0, 1.3, 0.0, 4, grid[i].apply(CostProfile{})).fee;
        const double hi = bar_costs(0, 1.3, 0.0, 4, grid[i + 3].apply(CostProfile{})).fee;
        CHECK(hi >= lo);
    }
}

TEST_CASE("stress variants") {
    const auto v = stress_variants(CostProfile{});
    REQUIRE(v.size() == 3);
    CHECK(v[0].profile.funding_mode == FundingMode::Off);
    CHECK(v[0].profile.taker_fee_bps == 4.0);
    CHECK(v[0].profile.base_slippage_bps == 2.0);
    CHECK(v[1].profile.taker_fee_bps == 8.0);
    CHECK(v[1].profile.base_slippage_bps == 4.0);
    CHECK(v[2].profile.taker_fee_bps == 12.0);
    CHECK(v[2].profile.base_slippage_bps == 6.0);
}

TEST_CASE("profile validation and exposure cap") {
    CostProfile p;
    CHECK(p.exposure_cap() == 5.0);
    p.notional_cap = 20'000.0;
    CHECK(p.exposure_cap() == 2.0);
    p.taker_fee_bps = -1.0;
    CHECK_THROWS_AS(p.validate(), Error);
    CostProfile q;
    q.max_leverage = 0.0;
    CHECK_THROWS_AS(q.validate(), Error);
}

TEST_CASE("fee-only and zero-cost profiles") {
    const CostProfile f = fee_only(CostProfile{});
    CHECK(f.taker_fee_bps == 4.0);
    CHECK(f.base_slippage_bps == 0.0);
    CHECK(f.funding_mode == FundingMode::Off);
    const CostProfile z = zero_cost(CostProfile{}, 2.0);
    CHECK(z.taker_fee_bps == 0.0);
    CHECK(z.max_leverage == 10.0);
    CHECK(z.notional_cap == 100'000.0);
    CHECK_THROWS_AS(zero_cost(CostProfile{}, 0.5), Error);
}
