#include "perpsieve/config.hpp"

#include <cmath>
#include <set>

#include "perpsieve/digest.hpp"
#include "perpsieve/error.hpp"

namespace perpsieve {

namespace {

// Reads known keys out of a JSON object and rejects anything left over.
class Fields {
public:
    Fields(const Json& j, std::string what) : j_(j), what_(std::move(what)) {
        if (!j.is_object()) fail(ErrorKind::InvalidArgument, what_ + " must be a JSON object");
    }

    void get(const char* key, int& out) {
        if (const Json* v = find(key)) {
            if (!v->is_number_integer()) bad(key, "an integer");
            const auto x = v->get<long long>();
            if (x < INT32_MIN || x > INT32_MAX) bad(key, "a 32-bit integer");
            out = static_cast<int>(x);
        }
    }
    void get(const char* key, std::size_t& out) {
        if (const Json* v = find(key)) {
            if (!v->is_number_integer() || v->get<long long>() < 0) bad(key, "a non-negative integer");
            out = v->get<std::size_t>();
        }
    }
    void get_u64(const char* key, std::uint64_t& out) {
        if (const Json* v = find(key)) {
            if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0)) {
                bad(key, "a non-negative integer");
            }
            out = v->get<std::uint64_t>();
        }
    }
    void get(const char* key, long long& out) {
        if (const Json* v = find(key)) {
            if (!v->is_number_integer()) bad(key, "an integer");
            out = v->get<long long>();
        }
    }
    void get(const char* key, double& out) {
        if (const Json* v = find(key)) {
            if (!v->is_number()) bad(key, "a number");
            out = v->get<double>();
            if (!std::isfinite(out)) bad(key, "finite");
        }
    }
    void get(const char* key, std::optional<double>& out) {
        if (const Json* v = find(key)) {
            if (v->is_null()) {
                out.reset();
                return;
            }
            double x = 0.0;
            get_number(key, *v, x);
            out = x;
        }
    }
    void get(const char* key, bool& out) {
        if (const Json* v = find(key)) {
            if (!v->is_boolean()) bad(key, "a boolean");
            out = v->get<bool>();
        }
    }
    void get(const char* key, std::string& out) {
        if (const Json* v = find(key)) {
            if (!v->is_string()) bad(key, "a string");
            out = v->get<std::string>();
        }
    }
    void get(const char* key, std::vector<double>& out) {
        if (const Json* v = find(key)) {
            if (!v->is_array()) bad(key, "an array of numbers");
            out.clear();
            for (const Json& e : *v) {
                double x = 0.0;
                get_number(key, e, x);
                out.push_back(x);
            }
        }
    }
    const Json* sub(const char* key) { return find(key); }

    void finish() const {
        for (const auto& [k, v] : j_.items()) {
            if (!seen_.count(k)) fail(ErrorKind::InvalidArgument, what_ + ": unknown key '" + k + "'");
        }
    }

private:
    const Json* find(const char* key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }
    void get_number(const char* key, const Json& v, double& out) const {
        if (!v.is_number()) bad(key, "a number");
        out = v.get<double>();
        if (!std::isfinite(out)) bad(key, "finite");
    }
    [[noreturn]] void bad(const char* key, const char* expected) const {
        fail(ErrorKind::InvalidArgument, what_ + "." + key + " must be " + expected);
    }

    const Json& j_;
    std::string what_;
    std::set<std::string> seen_;
};

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json rules_json(const GuardRules& r) {
    return {{"min_ann_return_30d", optional_json(r.min_ann_return_30d)},
            {"min_ann_return_90d", optional_json(r.min_ann_return_90d)},
            {"max_drawdown", optional_json(r.max_drawdown)},
            {"max_daily_loss", optional_json(r.max_daily_loss)},
            {"max_trades_30d", optional_json(r.max_trades_30d)}};
}

GuardRules rules_from_json(const Json& j, const std::string& what) {
    GuardRules r;
    Fields f(j, what);
    f.get("min_ann_return_30d", r.min_ann_return_30d);
    f.get("min_ann_return_90d", r.min_ann_return_90d);
    f.get("max_drawdown", r.max_drawdown);
    f.get("max_daily_loss", r.max_daily_loss);
    f.get("max_trades_30d", r.max_trades_30d);
    f.finish();
    return r;
}

}  // namespace

Json to_json(const StrategyParams& p) {
    return {{"ema_fast", p.ema_fast},
            {"ema_slow", p.ema_slow},
            {"ema_threshold", p.ema_threshold},
            {"theta_momentum", p.theta_momentum},
            {"w_mom", p.w_mom},
            {"bb_period", p.bb_period},
            {"bb_dev", p.bb_dev},
            {"min_hold_bars", p.min_hold_bars},
            {"cooldown_hours", p.cooldown_hours},
            {"atr_period", p.atr_period},
            {"atr_k_sl", p.atr_k_sl},
            {"atr_k_tp", p.atr_k_tp},
            {"max_exposure_abs", p.max_exposure_abs},
            {"funding_bias_thr_bps", p.funding_bias_thr_bps},
            {"funding_bias_k_thr_per_bps", p.funding_bias_k_thr_per_bps},
            {"funding_gates_enabled", p.funding_gates_enabled}};
}

StrategyParams params_from_json(const Json& j) {
    StrategyParams p;
    Fields f(j, "params");
    f.get("ema_fast", p.ema_fast);
    f.get("ema_slow", p.ema_slow);
    f.get("ema_threshold", p.ema_threshold);
    f.get("theta_momentum", p.theta_momentum);
    f.get("w_mom", p.w_mom);
    f.get("bb_period", p.bb_period);
    f.get("bb_dev", p.bb_dev);
    f.get("min_hold_bars", p.min_hold_bars);
    f.get("cooldown_hours", p.cooldown_hours);
    f.get("atr_period", p.atr_period);
    f.get("atr_k_sl", p.atr_k_sl);
    f.get("atr_k_tp", p.atr_k_tp);
    f.get("max_exposure_abs", p.max_exposure_abs);
    f.get("funding_bias_thr_bps", p.funding_bias_thr_bps);
    f.get("funding_bias_k_thr_per_bps", p.funding_bias_k_thr_per_bps);
    f.get("funding_gates_enabled", p.funding_gates_enabled);
    f.finish();
    p.validate();
    return p;
}

Json to_json(const CostProfile& p) {
    return {{"initial_equity", p.initial_equity},
            {"max_leverage", p.max_leverage},
            {"notional_cap", p.notional_cap},
            {"taker_fee_bps", p.taker_fee_bps},
            {"base_slippage_bps", p.base_slippage_bps},
            {"slippage_multiplier", p.slippage_multiplier},
            {"funding_mode", p.funding_mode == FundingMode::Off ? "off" : "realized"},
            {"funding_multiplier", p.funding_multiplier},
            {"fallback_rate_8h", p.fallback_rate_8h}};
}

CostProfile profile_from_json(const Json& j) {
    CostProfile p;
    Fields f(j, "profile");
    f.get("initial_equity", p.initial_equity);
    f.get("max_leverage", p.max_leverage);
    f.get("notional_cap", p.notional_cap);
    f.get("taker_fee_bps", p.taker_fee_bps);
    f.get("base_slippage_bps", p.base_slippage_bps);
    f.get("slippage_multiplier", p.slippage_multiplier);
    std::string mode = "realized";
    f.get("funding_mode", mode);
    if (mode == "off") {
        p.funding_mode = FundingMode::Off;
    } else if (mode != "realized") {
        fail(ErrorKind::InvalidArgument, "profile.funding_mode must be realized|off");
    }
    f.get("funding_multiplier", p.funding_multiplier);
    f.get("fallback_rate_8h", p.fallback_rate_8h);
    f.finish();
    p.validate();
    return p;
}

Json to_json(const WindowSpec& w) {
    return {{"name", w.name}, {"start", format_iso8601(w.start_ts)}, {"end", format_iso8601(w.end_ts)}};
}

WindowSpec window_from_json(const Json& j) {
    WindowSpec w;
    Fields f(j, "window");
    std::string start, end;
    f.get("name", w.name);
    f.get("start", start);
    f.get("end", end);
    f.finish();
    if (w.name.empty() || start.empty() || end.empty()) {
        fail(ErrorKind::InvalidArgument, "window needs name, start and end");
    }
    w.start_ts = parse_timestamp(start);
    w.end_ts = parse_timestamp(end);
    if (w.end_ts <= w.start_ts) fail(ErrorKind::InvalidArgument, "window '" + w.name + "' must end after it starts");
    return w;
}

Json to_json(const StablePolicy& p) {
    return {{"min_mean_monthly", p.min_mean_monthly},
            {"min_worst_monthly", p.min_worst_monthly},
            {"max_mean_dd", p.max_mean_dd},
            {"max_switch_density", p.max_switch_density},
            {"top_k", p.top_k}};
}

StablePolicy policy_from_json(const Json& j) {
    StablePolicy p;
    Fields f(j, "policy");
    f.get("min_mean_monthly", p.min_mean_monthly);
    f.get("min_worst_monthly", p.min_worst_monthly);
    f.get("max_mean_dd", p.max_mean_dd);
    f.get("max_switch_density", p.max_switch_density);
    f.get("top_k", p.top_k);
    f.finish();
    p.validate();
    return p;
}

Json to_json(const DdBucketPolicy& p) { return {{"boundaries", p.boundaries}, {"scales", p.scales}}; }

DdBucketPolicy dd_policy_from_json(const Json& j) {
    DdBucketPolicy p;
    Fields f(j, "dd_policy");
    f.get("boundaries", p.boundaries);
    f.get("scales", p.scales);
    f.finish();
    p.validate();
    return p;
}

Json to_json(const GuardConfig& c) {
    return {{"watch", rules_json(c.watch)},
            {"kill", rules_json(c.kill)},
            {"kill_mode", c.kill_mode == KillMode::Persistent ? "persistent" : "temporary"},
            {"temporary_kill_bars", c.temporary_kill_bars},
            {"bars_30d", c.bars_30d},
            {"bars_90d", c.bars_90d}};
}

GuardConfig guard_config_from_json(const Json& j) {
    GuardConfig c;
    Fields f(j, "guard");
    if (const Json* w = f.sub("watch")) c.watch = rules_from_json(*w, "guard.watch");
    if (const Json* k = f.sub("kill")) c.kill = rules_from_json(*k, "guard.kill");
    std::string mode = "persistent";
    f.get("kill_mode", mode);
    if (mode == "temporary") {
        c.kill_mode = KillMode::Temporary;
    } else if (mode != "persistent") {
        fail(ErrorKind::InvalidArgument, "guard.kill_mode must be temporary|persistent");
    }
    f.get("temporary_kill_bars", c.temporary_kill_bars);
    f.get("bars_30d", c.bars_30d);
    f.get("bars_90d", c.bars_90d);
    f.finish();
    c.validate();
    return c;
}

Json to_json(const TpeSettings& t) {
    return {{"gamma", t.gamma},
            {"n_startup", t.n_startup},
            {"n_ei_candidates", t.n_ei_candidates},
            {"prior_weight", t.prior_weight}};
}

TpeSettings tpe_from_json(const Json& j) {
    TpeSettings t;
    Fields f(j, "tpe");
    f.get("gamma", t.gamma);
    f.get("n_startup", t.n_startup);
    f.get("n_ei_candidates", t.n_ei_candidates);
    f.get("prior_weight", t.prior_weight);
    f.finish();
    if (!(t.gamma > 0.0 && t.gamma < 1.0)) fail(ErrorKind::InvalidArgument, "tpe.gamma must be in (0, 1)");
    if (t.n_ei_candidates == 0) fail(ErrorKind::InvalidArgument, "tpe.n_ei_candidates must be >= 1");
    if (!(t.prior_weight > 0.0)) fail(ErrorKind::InvalidArgument, "tpe.prior_weight must be > 0");
    return t;
}

SyntheticFundingSettings funding_settings_from_json(const Json& j) {
    SyntheticFundingSettings s;
    Fields f(j, "synthetic_funding");
    f.get("base_rate", s.base_rate);
    f.get("sensitivity", s.sensitivity);
    f.get("lookback_bars", s.lookback_bars);
    f.get("clamp", s.clamp);
    f.finish();
    if (s.lookback_bars < 2) fail(ErrorKind::InvalidArgument, "synthetic_funding.lookback_bars must be >= 2");
    if (!(s.clamp >= 0.0)) fail(ErrorKind::InvalidArgument, "synthetic_funding.clamp must be >= 0");
    return s;
}

SyntheticBarSettings bar_settings_from_json(const Json& j) {
    SyntheticBarSettings s;
    Fields f(j, "synthetic_bars");
    f.get("n_bars", s.n_bars);
    f.get("freq_hours", s.freq_hours);
    std::string start;
    f.get("start", start);
    if (!start.empty()) s.start_ts = parse_timestamp(start);
    f.get("start_price", s.start_price);
    f.get("drift", s.drift);
    f.get("volatility", s.volatility);
    f.get_u64("seed", s.seed);
    f.finish();
    if (s.n_bars == 0) fail(ErrorKind::InvalidArgument, "synthetic_bars.n_bars must be >= 1");
    if (s.freq_hours <= 0) fail(ErrorKind::InvalidArgument, "synthetic_bars.freq_hours must be > 0");
    if (!(s.start_price > 0.0)) fail(ErrorKind::InvalidArgument, "synthetic_bars.start_price must be > 0");
    if (!(s.volatility >= 0.0)) fail(ErrorKind::InvalidArgument, "synthetic_bars.volatility must be >= 0");
    return s;
}

Json to_json(const ValidationReport& r) {
    Json violations = Json::array();
    for (const auto& v : r.sanity_violations) violations.push_back({{"timestamp", v.ts}, {"rule", v.rule}});
    return {{"n_bars", r.n_bars},
            {"n_gaps", r.n_gaps},
            {"gap_locations", r.gap_locations},
            {"sanity_violations", violations},
            {"fatal", r.fatal}};
}

Json to_json(const MetricsSummary& m) {
    return {{"ann_return", m.ann_return},     {"sharpe", m.sharpe},
            {"max_dd", m.max_dd},             {"monthly_geom", m.monthly_geom},
            {"trades", m.trades},             {"switch_density", m.switch_density},
            {"total_return", m.total_return}, {"n_bars", m.n_bars}};
}

Json to_json(const AuditReport& r) {
    return {{"n_bars", r.n_bars},
            {"max_abs_signal_diff", r.max_abs_signal_diff},
            {"max_abs_exposure_diff", r.max_abs_exposure_diff},
            {"trades_diff", r.trades_diff},
            {"fees_diff", r.fees_diff},
            {"slip_diff", r.slip_diff},
            {"fund_diff", r.fund_diff},
            {"pass", r.pass},
            {"tolerance", r.tolerance}};
}

Json to_json(const PboResult& r) {
    return {{"pbo", r.pbo}, {"n_splits", r.n_splits}, {"logits", r.logits}};
}

Json to_json(const BootstrapResult& r) {
    return {{"estimate", r.estimate}, {"lower", r.lower},   {"upper", r.upper},
            {"block_len", r.block_len}, {"n_boot", r.n_boot}, {"level", r.level}};
}

Json to_json(const UpliftReport& r) {
    Json rows = Json::array();
    for (const auto& row : r.rows) {
        rows.push_back({{"candidate_id", row.candidate_id},
                        {"ann_strict", row.ann_strict},
                        {"ann_naive", row.ann_naive},
                        {"uplift", row.uplift}});
    }
    return {{"N", r.n},       {"median", r.median}, {"p25", r.p25},
            {"p75", r.p75},   {"frac_positive", r.frac_positive}, {"rows", rows}};
}

std::string canonical_dump(const Json& j) { return j.dump(-1, ' ', false, Json::error_handler_t::strict); }

std::string digest_of(const Json& j) { return sha256_hex(canonical_dump(j)); }

}  // namespace perpsieve
