#pragma once

#include <string>
#include <vector>

namespace perpsieve {

enum class FundingMode { RealizedWithFallback, Off };

// Defaults are the baseline perpetual-futures profile: 10k equity, 5x, 50k cap, 4/2 bps, 1 bp/8h fallback.
struct CostProfile {
    double initial_equity = 10'000.0;
    double max_leverage = 5.0;
    double notional_cap = 50'000.0;
    double taker_fee_bps = 4.0;
    double base_slippage_bps = 2.0;
    double slippage_multiplier = 1.0;
    FundingMode funding_mode = FundingMode::RealizedWithFallback;
    double funding_multiplier = 1.0;
    double fallback_rate_8h = 0.0001;

    /// Throws Error(InvalidArgument) on negative bps/multipliers or non-positive caps.
    void validate() const;

    /// min(max_leverage, notional_cap / initial_equity)
    double exposure_cap() const noexcept;
};

struct CostBreakdown {
    double fee = 0.0;
    double slip = 0.0;
    double funding = 0.0;
};

/// Per-bar costs in return units. Funding accrues on the exposure held during the bar.
CostBreakdown bar_costs(double pos_prev, double pos, double fr8h, double bar_hours, const CostProfile& profile);

struct CostScenario {
    std::string label;
    double taker_fee_bps = 4.0;
    double funding_multiplier = 1.0;

    CostProfile apply(const CostProfile& base) const;
};

/// 3 fee levels x 3 funding multipliers, fee-major.
std::vector<CostScenario> scenario_grid(const CostProfile& base);

struct StressVariant {
    std::string label;
    CostProfile profile;
};

/// [funding-off, 2x fees+slippage, 3x fees+slippage]
std::vector<StressVariant> stress_variants(const CostProfile& base);

/// Fees only: slippage and funding removed.
CostProfile fee_only(const CostProfile& base);

/// Zero-cost profile; caps multiplied by relax_caps_factor (1 = unchanged).
CostProfile zero_cost(const CostProfile& base, double relax_caps_factor = 1.0);

}  // namespace perpsieve
