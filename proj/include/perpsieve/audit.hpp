#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "perpsieve/engine.hpp"

namespace perpsieve {

// ---------------------------------------------------------------------------
// Full-chain reconciliation
// ---------------------------------------------------------------------------

inline constexpr double kDefaultAuditTolerance = 1e-9;

struct AuditReport {
    std::size_t n_bars = 0;
    double max_abs_signal_diff = 0.0;
    double max_abs_exposure_diff = 0.0;
    double trades_diff = 0.0;  // reference minus replay
    double fees_diff = 0.0;
    double slip_diff = 0.0;
    double fund_diff = 0.0;
    bool pass = false;
    double tolerance = kDefaultAuditTolerance;
};

/// Diffs a reference ledger against a replay. Throws Error(Schema) when the
/// two ledgers do not cover the same bars.
AuditReport audit_ledgers(std::span<const LedgerRow> reference, std::span<const LedgerRow> replay,
                          double tolerance = kDefaultAuditTolerance);

struct ReplayInputs {
    const BarSeries* series = nullptr;
    const FundingSeries* funding = nullptr;
    StrategyParams params;
    CostProfile profile;
    WindowSpec window;
    Semantics semantics = Semantics::StrictT1;
};

/// Re-executes the engine from the run inputs and reconciles against the reference.
AuditReport replay_and_audit(const ReplayInputs& inputs, std::span<const LedgerRow> reference,
                             double tolerance = kDefaultAuditTolerance);

std::string audit_report_json(const AuditReport& report, const std::string& run_id = {});

// ---------------------------------------------------------------------------
// ok / watch / kill guard
// ---------------------------------------------------------------------------

enum class GuardDecision { Ok, Watch, Kill };
enum class KillMode { Temporary, Persistent };

const char* to_string(GuardDecision d) noexcept;

// Unset rules never fire. Return floors are annualized; drawdown and daily loss are fractions.
struct GuardRules {
    std::optional<double> min_ann_return_30d;
    std::optional<double> min_ann_return_90d;
    std::optional<double> max_drawdown;
    std::optional<double> max_daily_loss;
    std::optional<double> max_trades_30d;
};

struct GuardConfig {
    GuardRules watch;
    GuardRules kill;
    KillMode kill_mode = KillMode::Persistent;
    std::size_t temporary_kill_bars = 6;
    std::size_t bars_30d = 180;
    std::size_t bars_90d = 540;

    /// Kill thresholds must be at least as severe as the matching watch thresholds.
    void validate() const;
};

struct GuardInputRow {
    Timestamp ts = 0;
    double r_net = 0.0;
    double exposure = 0.0;
};

struct GuardStep {
    Timestamp ts = 0;
    GuardDecision decision = GuardDecision::Ok;
    std::vector<std::string> triggered_rules;
    double exposure_out = 0.0;  // forced to 0 on kill
};

struct GuardState {
    GuardDecision decision = GuardDecision::Ok;
    bool disabled = false;          // persistent kill latch
    std::size_t kill_bars_left = 0;  // temporary kill countdown
    std::optional<Timestamp> last_ts;
    std::optional<Timestamp> last_transition_ts;

    std::deque<double> returns;     // most recent bars_90d net returns
    std::deque<double> equity;      // matching equity marks
    std::deque<std::uint8_t> trade_flags;
    double equity_now = 1.0;
    double prev_exposure = 0.0;
    std::int64_t day = INT64_MIN;
    double day_growth = 1.0;

    bool operator==(const GuardState&) const = default;
};

/// Pure transition: returns the next state and the per-row decisions.
/// Throws Error(InvalidArgument) on rows that are not strictly after the state's last timestamp.
std::pair<GuardState, std::vector<GuardStep>> guard_step(const GuardState& state, std::span<const GuardInputRow> rows,
                                                        const GuardConfig& config);

/// Manual resume: clears the kill latch. Rolling buffers are kept.
GuardState guard_resume(const GuardState& state);

inline constexpr const char* kGuardLogHeader = "timestamp,decision,triggered_rules";

void write_guard_log_csv(std::span<const GuardStep> steps, const std::string& path, const std::string& run_id = {});

}  // namespace perpsieve
