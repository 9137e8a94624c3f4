#include "perpsieve/costs.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "perpsieve/error.hpp"

namespace perpsieve {

void CostProfile::validate() const {
    auto nonneg = [](double v, const char* name) {
        if (!(v >= 0.0) || !std::isfinite(v)) fail(ErrorKind::InvalidArgument, std::string(name) + " must be >= 0");
    };
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) fail(ErrorKind::InvalidArgument, std::string(name) + " must be > 0");
    };
    positive(initial_equity, "initial_equity");
    positive(max_leverage, "max_leverage");
    positive(notional_cap, "notional_cap");
    nonneg(taker_fee_bps, "taker_fee_bps");
    nonneg(base_slippage_bps, "base_slippage_bps");
    nonneg(slippage_multiplier, "slippage_multiplier");
    nonneg(funding_multiplier, "funding_multiplier");
    if (!std::isfinite(fallback_rate_8h)) fail(ErrorKind::InvalidArgument, "fallback_rate_8h must be finite");
}

double CostProfile::exposure_cap() const noexcept { return std::min(max_leverage, notional_cap / initial_equity); }

CostBreakdown bar_costs(double pos_prev, double pos, double fr8h, double bar_hours, const CostProfile& profile) {
    const double turnover = std::abs(pos - pos_prev);
    CostBreakdown c;
    c.fee = turnover * (profile.taker_fee_bps / 10000.0);
    c.slip = turnover * (profile.base_slippage_bps / 10000.0) * profile.slippage_multiplier;
    if (profile.funding_mode == FundingMode::RealizedWithFallback) {
        c.funding = pos * fr8h * profile.funding_multiplier * (bar_hours / 8.0);
    }
    return c;
}

CostProfile CostScenario::apply(const CostProfile& base) const {
    CostProfile p = base;
    p.taker_fee_bps = taker_fee_bps;
    p.funding_multiplier = funding_multiplier;
    return p;
}

std::vector<CostScenario> scenario_grid(const CostProfile& base) {
    base.validate();
    static constexpr double kFees[] = {3.0, 4.0, 6.0};
    static constexpr double kFundingMults[] = {0.5, 1.0, 1.5};
    std::vector<CostScenario> grid;
    grid.reserve(9);
    for (double fee : kFees) {
        for (double fm : kFundingMults) {
            char label[48];
            std::snprintf(label, sizeof label, "fee%g_fund%g", fee, fm);
            grid.push_back({label, fee, fm});
        }
    }
    return grid;
}

std::vector<StressVariant> stress_variants(const CostProfile& base) {
    base.validate();
    CostProfile off = base;
    off.funding_mode = FundingMode::Off;
    CostProfile x2 = base;
    x2.taker_fee_bps *= 2.0;
    x2.base_slippage_bps *= 2.0;
    CostProfile x3 = base;
    x3.taker_fee_bps *= 3.0;
    x3.base_slippage_bps *= 3.0;
    return {{"funding_off", off}, {"pess_2x", x2}, {"pess_3x", x3}};
}

CostProfile fee_only(const CostProfile& base) {
    CostProfile p = base;
    p.base_slippage_bps = 0.0;
    p.funding_mode = FundingMode::Off;
    return p;
}

CostProfile zero_cost(const CostProfile& base, double relax_caps_factor) {
    if (!(relax_caps_factor >= 1.0)) fail(ErrorKind::InvalidArgument, "cap relaxation factor must be >= 1");
    CostProfile p = fee_only(base);
    p.taker_fee_bps = 0.0;
    p.max_leverage *= relax_caps_factor;
    p.notional_cap *= relax_caps_factor;
    return p;
}

}  // namespace perpsieve
