#include "perpsieve/perpsieve.h"

#include <algorithm>
#include <cstring>
#include <initializer_list>
#include <set>
#include <string>

#include "perpsieve/config.hpp"
#include "perpsieve/error.hpp"
#include "perpsieve/stats.hpp"

using namespace perpsieve;

struct ps_bars {
    BarSeries series;
};
struct ps_funding {
    FundingSeries funding;
};
struct ps_result {
    BacktestResult result;
};
struct ps_study {
    StudyHistory history;
};
struct ps_guard {
    GuardConfig config;
    GuardState state;
    std::vector<GuardStep> log;
};

namespace {

thread_local std::string g_last_error;

ps_status status_of(ErrorKind k) {
    switch (k) {
        case ErrorKind::InvalidArgument: return PS_ERR_INVALID_ARGUMENT;
        case ErrorKind::DataValidation: return PS_ERR_DATA_VALIDATION;
        case ErrorKind::Numerical: return PS_ERR_NUMERICAL;
        case ErrorKind::Io: return PS_ERR_IO;
        case ErrorKind::Schema: return PS_ERR_SCHEMA;
    }
    return PS_ERR_INTERNAL;
}

template <typename F>
ps_status guarded(F&& f) {
    try {
        g_last_error.clear();
        f();
        return PS_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return status_of(e.kind());
    } catch (const Json::exception& e) {
        g_last_error = std::string("json: ") + e.what();
        return PS_ERR_INVALID_ARGUMENT;
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return PS_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return PS_ERR_INTERNAL;
    }
}

template <typename T>
void need(const T* p, const char* what) {
    if (p == nullptr) fail(ErrorKind::InvalidArgument, std::string(what) + " must not be null");
}

char* dup(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void emit(char** out, const Json& j) {
    need(out, "output pointer");
    *out = dup(j.dump(2));
}

Json parse(const char* text, const char* what) {
    if (text == nullptr || *text == '\0') return Json::object();
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        fail(ErrorKind::InvalidArgument, std::string(what) + " is not valid JSON: " + e.what());
    }
}

void allow_keys(const Json& j, std::initializer_list<const char*> keys, const char* what) {
    if (!j.is_object()) fail(ErrorKind::InvalidArgument, std::string(what) + " must be a JSON object");
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, v] : j.items()) {
        if (!allowed.count(k)) fail(ErrorKind::InvalidArgument, std::string(what) + ": unknown key '" + k + "'");
    }
}

template <typename T>
T value_or(const Json& j, const char* key, T fallback) {
    const auto it = j.find(key);
    return it == j.end() || it->is_null() ? fallback : it->get<T>();
}

StrategyParams params_in(const Json& j, const char* key = "params") {
    const auto it = j.find(key);
    return it == j.end() ? StrategyParams{} : params_from_json(*it);
}

CostProfile profile_in(const Json& j) {
    const auto it = j.find("profile");
    return it == j.end() ? CostProfile{} : profile_from_json(*it);
}

WindowSpec window_in(const Json& j, const BarSeries& series) {
    const auto it = j.find("window");
    return it == j.end() ? full_window(series) : window_from_json(*it);
}

// Pool from an inline list of params or the best pool_size rows of a study CSV.
std::vector<Candidate> pool_in(const Json& j, std::size_t* n_trials_out = nullptr) {
    std::vector<Candidate> pool;
    if (const auto it = j.find("pool"); it != j.end()) {
        std::size_t id = 1;
        for (const Json& p : *it) pool.push_back({id++, params_from_json(p)});
        if (n_trials_out) *n_trials_out = pool.size();
    } else if (const auto csv_it = j.find("pool_csv"); csv_it != j.end()) {
        std::vector<StudyRow> rows = read_study_csv(csv_it->get<std::string>());
        if (n_trials_out) *n_trials_out = rows.size();
        std::stable_sort(rows.begin(), rows.end(), [](const StudyRow& a, const StudyRow& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.trial_id < b.trial_id;
        });
        const auto n = value_or<std::size_t>(j, "pool_size", rows.size());
        for (std::size_t i = 0; i < std::min(n, rows.size()); ++i) pool.push_back({rows[i].trial_id, rows[i].params});
    } else {
        fail(ErrorKind::InvalidArgument, "request needs either 'pool' or 'pool_csv'");
    }
    if (pool.empty()) fail(ErrorKind::InvalidArgument, "candidate pool is empty");
    return pool;
}

const char* str_or_null(const char* s) { return s ? s : ""; }

ps_guard_decision to_c(GuardDecision d) {
    switch (d) {
        case GuardDecision::Ok: return PS_GUARD_OK;
        case GuardDecision::Watch: return PS_GUARD_WATCH;
        case GuardDecision::Kill: return PS_GUARD_KILL;
    }
    return PS_GUARD_OK;
}

Json ladder_json(const AblationVariant& v) {
    Json j = to_json(v.metrics);
    j["label"] = v.label;
    return j;
}

}  // namespace

extern "C" {

const char* ps_version(void) { return "0.1.0"; }

const char* ps_last_error(void) { return g_last_error.c_str(); }

void ps_string_free(char* s) { delete[] s; }

ps_status ps_digest_json(const char* json, char** hex_out) {
    return guarded([&] {
        need(json, "json");
        need(hex_out, "output pointer");
        *hex_out = dup(digest_of(parse(json, "document")));
    });
}

ps_status ps_defaults_json(char** json_out) {
    return guarded([&] {
        emit(json_out, Json{{"params", to_json(StrategyParams{})},
                            {"profile", to_json(CostProfile{})},
                            {"policy", to_json(StablePolicy{})},
                            {"dd_policy", to_json(DdBucketPolicy{})},
                            {"guard", to_json(GuardConfig{})},
                            {"tpe", to_json(TpeSettings{})}});
    });
}

ps_status ps_scenarios(const char* profile_json, char** json_out) {
    return guarded([&] {
        const CostProfile base = profile_json ? profile_from_json(parse(profile_json, "profile")) : CostProfile{};
        Json out = Json::array();
        for (const CostScenario& s : scenario_grid(base)) {
            out.push_back({{"label", s.label}, {"profile", to_json(s.apply(base))}});
        }
        emit(json_out, out);
    });
}

ps_status ps_bars_load_csv(const char* path, int freq_hours, ps_bars** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "output pointer");
        *out = new ps_bars{read_bars_csv(path, freq_hours)};
    });
}

ps_status ps_bars_synthesize(const char* settings_json, ps_bars** out) {
    return guarded([&] {
        need(out, "output pointer");
        *out = new ps_bars{synthetic_bars(bar_settings_from_json(parse(settings_json, "settings")))};
    });
}

ps_status ps_bars_resample(const ps_bars* bars, int freq_hours, ps_bars** out) {
    return guarded([&] {
        need(bars, "bars");
        need(out, "output pointer");
        *out = new ps_bars{resample(bars->series, freq_hours)};
    });
}

ps_status ps_bars_write_csv(const ps_bars* bars, const char* path) {
    return guarded([&] {
        need(bars, "bars");
        need(path, "path");
        write_bars_csv(bars->series, path);
    });
}

ps_status ps_bars_validate(const ps_bars* bars, size_t gap_tolerance, char** report_json) {
    return guarded([&] {
        need(bars, "bars");
        emit(report_json, to_json(validate_series(bars->series, gap_tolerance)));
    });
}

ps_status ps_bars_full_window(const ps_bars* bars, const char* name, char** window_json) {
    return guarded([&] {
        need(bars, "bars");
        emit(window_json, to_json(full_window(bars->series, name ? name : "full")));
    });
}

size_t ps_bars_count(const ps_bars* bars) { return bars ? bars->series.size() : 0; }

void ps_bars_free(ps_bars* bars) { delete bars; }

ps_status ps_funding_load_csv(const char* path, double fallback_rate, ps_funding** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "output pointer");
        *out = new ps_funding{read_funding_csv(path, fallback_rate)};
    });
}

ps_status ps_funding_synthesize(const ps_bars* bars, const char* settings_json, ps_funding** out) {
    return guarded([&] {
        need(bars, "bars");
        need(out, "output pointer");
        *out = new ps_funding{synthetic_funding(bars->series, funding_settings_from_json(parse(settings_json, "settings")))};
    });
}

ps_status ps_funding_write_csv(const ps_funding* funding, const char* path) {
    return guarded([&] {
        need(funding, "funding");
        need(path, "path");
        write_funding_csv(funding->funding, path);
    });
}

void ps_funding_free(ps_funding* funding) { delete funding; }

ps_status ps_backtest(const ps_bars* bars, const ps_funding* funding, const char* params_json,
                      const char* profile_json, const char* window_json, const char* semantics, ps_result** out) {
    return guarded([&] {
        need(bars, "bars");
        need(funding, "funding");
        need(out, "output pointer");
        const StrategyParams params = params_from_json(parse(params_json, "params"));
        const CostProfile profile = profile_from_json(parse(profile_json, "profile"));
        const WindowSpec window = window_json && *window_json ? window_from_json(parse(window_json, "window"))
                                                             : full_window(bars->series);
        const Semantics sem = semantics_from_string(semantics && *semantics ? semantics : "strict");
        *out = new ps_result{run_backtest(bars->series, funding->funding, params, profile, window, sem)};
    });
}

ps_status ps_result_metrics(const ps_result* result, double rf_annual, char** metrics_json) {
    return guarded([&] {
        need(result, "result");
        Json j = to_json(metrics(result->result, rf_annual));
        j["window"] = to_json(result->result.window);
        j["semantics"] = to_string(result->result.semantics);
        j["params_digest"] = result->result.params_digest;
        j["profile_digest"] = result->result.profile_digest;
        emit(metrics_json, j);
    });
}

ps_status ps_result_write_ledger(const ps_result* result, const char* path, const char* run_id) {
    return guarded([&] {
        need(result, "result");
        need(path, "path");
        write_ledger_csv(result->result, path, str_or_null(run_id));
    });
}

size_t ps_result_rows(const ps_result* result) { return result ? result->result.ledger.size() : 0; }

ps_status ps_result_row(const ps_result* result, size_t index, ps_ledger_row* row) {
    return guarded([&] {
        need(result, "result");
        need(row, "row");
        if (index >= result->result.ledger.size()) fail(ErrorKind::InvalidArgument, "ledger row index out of range");
        const LedgerRow& r = result->result.ledger[index];
        *row = {r.ts, r.signal, r.exposure, r.r_mkt, r.r_raw, r.c_fee, r.c_slip, r.c_fund, r.r_net};
    });
}

ps_status ps_result_dd_overlay(const ps_result* result, const char* policy_json, ps_result** out) {
    return guarded([&] {
        need(result, "result");
        need(out, "output pointer");
        const DdBucketPolicy policy = dd_policy_from_json(parse(policy_json, "dd_policy"));
        *out = new ps_result{dd_bucket_overlay(result->result, policy)};
    });
}

void ps_result_free(ps_result* result) { delete result; }

ps_status ps_study_run(const ps_bars* bars, const ps_funding* funding, const char* request_json, ps_study** out) {
    return guarded([&] {
        need(bars, "bars");
        need(funding, "funding");
        need(out, "output pointer");
        const Json req = parse(request_json, "study request");
        allow_keys(req, {"profile", "window", "sampler", "budget", "seed", "tpe"}, "study request");
        const CostProfile profile = profile_in(req);
        const WindowSpec window = window_in(req, bars->series);
        const Sampler sampler = sampler_from_string(value_or<std::string>(req, "sampler", "tpe"));
        const auto budget = value_or<std::size_t>(req, "budget", 40);
        const auto seed = value_or<std::uint64_t>(req, "seed", 0);
        const TpeSettings tpe = req.contains("tpe") ? tpe_from_json(req["tpe"]) : TpeSettings{};
        require_valid(bars->series);
        const Objective objective = backtest_objective(bars->series, funding->funding, profile, window);
        *out = new ps_study{run_study(objective, strategy_space(), budget, sampler, seed, tpe)};
    });
}

ps_status ps_study_write(const ps_study* study, const char* study_csv, const char* best_so_far_csv,
                         const char* run_id) {
    return guarded([&] {
        need(study, "study");
        if (study_csv) write_study_csv(study->history, study_csv, str_or_null(run_id));
        if (best_so_far_csv) write_best_so_far_csv(best_so_far(study->history), best_so_far_csv, str_or_null(run_id));
    });
}

ps_status ps_study_summary(const ps_study* study, char** summary_json) {
    return guarded([&] {
        need(study, "study");
        const StudyHistory& h = study->history;
        Json curve = Json::array();
        for (const BestSoFarRow& r : best_so_far(h)) {
            curve.push_back({{"budget", r.budget}, {"best_score", r.best_score}, {"best_trial_id", r.best_trial_id}});
        }
        Json j{{"n_trials", h.trials.size()},
               {"seed", h.seed},
               {"sampler", to_string(h.sampler)},
               {"space_digest", h.space_digest},
               {"best_so_far", curve}};
        if (!h.trials.empty()) {
            const Trial& best = h.trials[top_k(h, 1).front() - 1];
            j["best_trial_id"] = best.id;
            j["best_score"] = best.score;
            j["best_params"] = to_json(params_from_vector(best.x));
        }
        emit(summary_json, j);
    });
}

void ps_study_free(ps_study* study) { delete study; }

ps_status ps_screen(const ps_bars* bars, const ps_funding* funding, const char* request_json, char** report_json) {
    return guarded([&] {
        need(bars, "bars");
        need(funding, "funding");
        const Json req = parse(request_json, "screen request");
        allow_keys(req,
                   {"pool", "pool_csv", "pool_size", "profile", "window", "policy", "scenarios", "rolling",
                    "threshold_scan", "outputs", "run_id"},
                   "screen request");
        const std::vector<Candidate> pool = pool_in(req);
        const CostProfile profile = profile_in(req);
        const WindowSpec window = window_in(req, bars->series);
        const StablePolicy policy = req.contains("policy") ? policy_from_json(req["policy"]) : StablePolicy{};
        std::vector<CostScenario> scenarios = scenario_grid(profile);
        if (req.contains("scenarios") && !req["scenarios"].is_null()) {
            const auto wanted = req["scenarios"].get<std::vector<std::string>>();
            std::vector<CostScenario> kept;
            for (const auto& label : wanted) {
                const auto it = std::find_if(scenarios.begin(), scenarios.end(),
                                             [&](const CostScenario& s) { return s.label == label; });
                if (it == scenarios.end()) fail(ErrorKind::InvalidArgument, "unknown scenario '" + label + "'");
                kept.push_back(*it);
            }
            scenarios = kept;
        }
        const auto run_id = value_or<std::string>(req, "run_id", "");
        const Json outputs = value_or<Json>(req, "outputs", Json::object());
        allow_keys(outputs, {"robust_summary", "aggregates", "threshold_scan", "window_summary"}, "screen outputs");

        const std::vector<ScenarioSummary> summaries =
            evaluate_pool(pool, bars->series, funding->funding, profile, scenarios, window);
        const ScreeningReport report = stable_filter(summaries, policy);

        Json out{{"pool_size", report.pool_size},
                 {"n_scenarios", scenarios.size()},
                 {"n_backtests", pool.size() * scenarios.size()},
                 {"passing", report.passing},
                 {"top_k", report.top_k},
                 {"window", to_json(window)}};
        if (outputs.contains("robust_summary")) {
            write_robust_summary_csv(summaries, outputs["robust_summary"].get<std::string>(), run_id);
        }
        if (outputs.contains("aggregates")) {
            write_aggregates_csv(summaries, report, outputs["aggregates"].get<std::string>(), run_id);
        }
        if (req.contains("threshold_scan")) {
            const Json& ts = req["threshold_scan"];
            allow_keys(ts, {"floors", "dd_caps", "switch_caps"}, "threshold_scan");
            const auto rows = threshold_scan(summaries, ts.at("floors").get<std::vector<double>>(),
                                             ts.at("dd_caps").get<std::vector<double>>(),
                                             ts.at("switch_caps").get<std::vector<double>>(), policy);
            out["threshold_scan_rows"] = rows.size();
            if (outputs.contains("threshold_scan")) {
                write_threshold_scan_csv(rows, outputs["threshold_scan"].get<std::string>(), run_id);
            }
        }
        if (req.contains("rolling")) {
            const Json& r = req["rolling"];
            allow_keys(r, {"win", "step"}, "rolling");
            const auto windows = evaluate_windows(pool, bars->series, funding->funding, profile, window,
                                                  r.at("win").get<std::size_t>(), r.at("step").get<std::size_t>());
            out["rolling_windows"] = pool.empty() ? 0 : windows.size() / pool.size();
            if (outputs.contains("window_summary")) {
                write_window_summary_csv(windows, outputs["window_summary"].get<std::string>(), run_id);
            }
        }
        emit(report_json, out);
    });
}

ps_status ps_dsr(const char* request_json, char** result_json) {
    return guarded([&] {
        const Json req = parse(request_json, "dsr request");
        allow_keys(req, {"sr_hat", "n_obs", "skew", "kurtosis", "n_trials", "sr_variance"}, "dsr request");
        const double sr_hat = req.at("sr_hat").get<double>();
        const auto n_obs = req.at("n_obs").get<std::size_t>();
        const double skew = value_or<double>(req, "skew", 0.0);
        const double kurt = value_or<double>(req, "kurtosis", 3.0);
        const auto n_trials = req.at("n_trials").get<std::size_t>();
        const double var = req.at("sr_variance").get<double>();
        Json out = req;
        out["sr0"] = expected_max_sharpe(n_trials, var);
        out["dsr"] = deflated_sharpe(sr_hat, n_obs, skew, kurt, n_trials, var);
        emit(result_json, out);
    });
}

ps_status ps_dsr_from_pool(const ps_bars* bars, const ps_funding* funding, const char* request_json,
                           char** result_json) {
    return guarded([&] {
        need(bars, "bars");
        need(funding, "funding");
        const Json req = parse(request_json, "dsr request");
        allow_keys(req, {"pool", "pool_csv", "pool_size", "profile", "window", "trials_multiplier", "rf"},
                   "dsr request");
        std::size_t n_trials = 0;
        const std::vector<Candidate> pool = pool_in(req, &n_trials);
        n_trials *= value_or<std::size_t>(req, "trials_multiplier", 1);
        const CostProfile profile = profile_in(req);
        const WindowSpec window = window_in(req, bars->series);
        const double rf = value_or<double>(req, "rf", 0.03);
        std::vector<double> sharpes;
        std::vector<double> best_returns;
        for (const Candidate& c : pool) {
            const BacktestResult r = run_backtest(bars->series, funding->funding, c.params, profile, window,
                                                  Semantics::StrictT1);
            sharpes.push_back(metrics(r, rf).sharpe);
            if (best_returns.empty()) best_returns = ledger_net(r);
        }
        const double sd = stats::sample_sd(sharpes);
        const double var = sd * sd;
        Json out{{"sr_hat", sharpes.front()},
                 {"n_obs", best_returns.size()},
                 {"skew", stats::skewness(best_returns)},
                 {"kurtosis", stats::kurtosis(best_returns)},
                 {"n_trials", n_trials},
                 {"sr_variance", var},
                 {"best_candidate_id", pool.front().id}};
        out["sr0"] = expected_max_sharpe(n_trials, var);
        out["dsr"] = deflated_sharpe(sharpes.front(), best_returns.size(), out["skew"].get<double>(),
                                     out["kurtosis"].get<double>(), n_trials, var);
        emit(result_json, out);
    });
}

ps_status ps_pbo(const ps_bars* bars, const ps_funding* funding, const char* request_json, char** result_json) {
    return guarded([&] {
        need(bars, "bars");
        need(funding, "funding");
        const Json req = parse(request_json, "pbo request");
        allow_keys(req, {"pool", "pool_csv", "pool_size", "profile", "window", "n_segments"}, "pbo request");
        const std::vector<Candidate> pool = pool_in(req);
        const CostProfile profile = profile_in(req);
        const WindowSpec window = window_in(req, bars->series);
        const auto n_segments = value_or<std::size_t>(req, "n_segments", 8);
        ReturnMatrix m;
        std::vector<std::vector<double>> monthly;
        for (const Candidate& c : pool) {
            const BacktestResult r = run_backtest(bars->series, funding->funding, c.params, profile, window,
                                                  Semantics::StrictT1);
            monthly.push_back(monthly_returns(ledger_timestamps(r), ledger_net(r)));
            m.candidate_ids.push_back(c.id);
        }
        const std::size_t months = monthly.front().size();
        if (n_segments == 0 || months < n_segments) {
            fail(ErrorKind::InvalidArgument, "window has " + std::to_string(months) + " months, fewer than n_segments");
        }
        // Drop the oldest months so the columns split evenly.
        const std::size_t skip = months % n_segments;
        m.rows = pool.size();
        m.cols = months - skip;
        for (const auto& row : monthly) m.values.insert(m.values.end(), row.begin() + static_cast<std::ptrdiff_t>(skip), row.end());
        Json out = to_json(cscv_pbo(m, n_segments));
        out["candidate_ids"] = m.candidate_ids;
        out["n_months"] = m.cols;
        emit(result_json, out);
    });
}

ps_status ps_pbo_matrix(const double* values, size_t rows, size_t cols, size_t n_segments, char** result_json) {
    return guarded([&] {
        need(values, "values");
        ReturnMatrix m;
        m.rows = rows;
        m.cols = cols;
        m.values.assign(values, values + rows * cols);
        for (std::size_t i = 0; i < rows; ++i) m.candidate_ids.push_back(i + 1);
        emit(result_json, to_json(cscv_pbo(m, n_segments)));
    });
}

ps_status ps_bootstrap(const double* a, const double* b, size_t n, size_t block_len, size_t n_boot, double level,
                       uint64_t seed, char** result_json) {
    return guarded([&] {
        need(a, "a");
        need(b, "b");
        emit(result_json, to_json(block_bootstrap_ci({a, n}, {b, n}, block_len, n_boot, level, seed)));
    });
}

ps_status ps_bootstrap_backtest(const ps_bars* bars, const ps_funding* funding, const char* request_json,
                                char** result_json) {
    return guarded([&] {
        need(bars, "bars");
        need(funding, "funding");
        const Json req = parse(request_json, "bootstrap request");
        allow_keys(req, {"params", "baseline_params", "profile", "window", "block_len", "n_boot", "level", "seed"},
                   "bootstrap request");
        const CostProfile profile = profile_in(req);
        const WindowSpec window = window_in(req, bars->series);
        const BacktestResult ra =
            run_backtest(bars->series, funding->funding, params_in(req), profile, window, Semantics::StrictT1);
        const std::vector<double> a = monthly_returns(ledger_timestamps(ra), ledger_net(ra));
        std::vector<double> b;
        std::string baseline = "buy_and_hold";
        if (req.contains("baseline_params")) {
            const BacktestResult rb = run_backtest(bars->series, funding->funding, params_in(req, "baseline_params"),
                                                   profile, window, Semantics::StrictT1);
            b = monthly_returns(ledger_timestamps(rb), ledger_net(rb));
            baseline = "baseline_params";
        } else {
            const IndexRange range = window_range(bars->series, window);
            std::vector<Timestamp> ts;
            std::vector<double> r;
            for (std::size_t t = range.first; t < range.last; ++t) {
                ts.push_back(bars->series.bars[t].ts);
                r.push_back(t > range.first ? bars->series.bars[t].close / bars->series.bars[t - 1].close - 1.0 : 0.0);
            }
            b = monthly_returns(ts, r);
        }
        Json out = to_json(block_bootstrap_ci(a, b, value_or<std::size_t>(req, "block_len", 3),
                                              value_or<std::size_t>(req, "n_boot", 2000),
                                              value_or<double>(req, "level", 0.95),
                                              value_or<std::uint64_t>(req, "seed", 0)));
        out["baseline"] = baseline;
        out["n_months"] = a.size();
        emit(result_json, out);
    });
}

ps_status ps_ablation(const ps_bars* bars, const ps_funding* funding, const char* request_json, char** result_json) {
    return guarded([&] {
        need(bars, "bars");
        need(funding, "funding");
        const Json req = parse(request_json, "ablation request");
        allow_keys(req, {"params", "profile", "window", "relax_caps_factor", "rf"}, "ablation request");
        const StrategyParams params = params_in(req);
        const CostProfile profile = profile_in(req);
        const WindowSpec window = window_in(req, bars->series);
        const double rf = value_or<double>(req, "rf", 0.03);
        Json ladder = Json::array();
        for (const auto& v : cost_ablation(params, bars->series, funding->funding, window, profile,
                                           value_or<double>(req, "relax_caps_factor", 1.0), rf)) {
            ladder.push_back(ladder_json(v));
        }
        const GateAblation g = funding_gate_ablation(params, bars->series, funding->funding, window, profile, rf);
        Json gates{{"gates_on", ladder_json(g.full)},
                   {"gates_off", ladder_json(g.no_gates)},
                   {"long_entries_gates_on", g.long_entries_full},
                   {"long_entries_gates_off", g.long_entries_no_gates}};
        emit(result_json, Json{{"cost_ladder", ladder}, {"funding_gates", gates}, {"window", to_json(window)}});
    });
}

ps_status ps_uplift(const ps_bars* bars, const ps_funding* funding, const char* request_json, char** result_json) {
    return guarded([&] {
        need(bars, "bars");
        need(funding, "funding");
        const Json req = parse(request_json, "uplift request");
        allow_keys(req, {"pool", "pool_csv", "pool_size", "profile", "window"}, "uplift request");
        const std::vector<Candidate> pool = pool_in(req);
        emit(result_json, to_json(semantics_uplift(pool, bars->series, funding->funding, window_in(req, bars->series),
                                                   profile_in(req))));
    });
}

ps_status ps_audit_replay(const ps_bars* bars, const ps_funding* funding, const char* request_json,
                          const char* ledger_csv, double tolerance, char** report_json) {
    return guarded([&] {
        need(bars, "bars");
        need(funding, "funding");
        need(ledger_csv, "ledger_csv");
        const Json req = parse(request_json, "audit request");
        allow_keys(req, {"params", "profile", "window", "semantics"}, "audit request");
        ReplayInputs in;
        in.series = &bars->series;
        in.funding = &funding->funding;
        in.params = params_in(req);
        in.profile = profile_in(req);
        in.window = window_in(req, bars->series);
        in.semantics = semantics_from_string(value_or<std::string>(req, "semantics", "strict"));
        const std::vector<LedgerRow> reference = read_ledger_csv(ledger_csv);
        emit(report_json, to_json(replay_and_audit(in, reference, tolerance)));
    });
}

ps_status ps_guard_create(const char* config_json, ps_guard** out) {
    return guarded([&] {
        need(out, "output pointer");
        *out = new ps_guard{guard_config_from_json(parse(config_json, "guard config")), {}, {}};
    });
}

ps_status ps_guard_step(ps_guard* guard, const ps_guard_row* rows, size_t n, ps_guard_decision* decisions,
                        double* exposure_out) {
    return guarded([&] {
        need(guard, "guard");
        if (n > 0) need(rows, "rows");
        std::vector<GuardInputRow> in(n);
        for (std::size_t i = 0; i < n; ++i) in[i] = {rows[i].timestamp, rows[i].r_net, rows[i].exposure};
        auto [next, steps] = guard_step(guard->state, in, guard->config);
        for (std::size_t i = 0; i < steps.size(); ++i) {
            if (decisions) decisions[i] = to_c(steps[i].decision);
            if (exposure_out) exposure_out[i] = steps[i].exposure_out;
        }
        guard->state = std::move(next);
        guard->log.insert(guard->log.end(), steps.begin(), steps.end());
    });
}

ps_status ps_guard_resume(ps_guard* guard) {
    return guarded([&] {
        need(guard, "guard");
        guard->state = guard_resume(guard->state);
    });
}

ps_guard_decision ps_guard_state(const ps_guard* guard) {
    return guard ? to_c(guard->state.decision) : PS_GUARD_OK;
}

ps_status ps_guard_write_log(const ps_guard* guard, const char* path, const char* run_id) {
    return guarded([&] {
        need(guard, "guard");
        need(path, "path");
        write_guard_log_csv(guard->log, path, str_or_null(run_id));
    });
}

void ps_guard_free(ps_guard* guard) { delete guard; }

}  // extern "C"
