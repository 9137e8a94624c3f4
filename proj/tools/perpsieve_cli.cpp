#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include "perpsieve/perpsieve.h"

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

// Exit codes.
constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kData = 2;
constexpr int kContract = 3;

struct Failure {
    int code;
    std::string message;
};

int exit_code_for(ps_status s) {
    switch (s) {
        case PS_OK: return kOk;
        case PS_ERR_DATA_VALIDATION:
        case PS_ERR_IO:
        case PS_ERR_SCHEMA: return kData;
        default: return kContract;
    }
}

void check(ps_status s, const std::string& what) {
    if (s != PS_OK) throw Failure{exit_code_for(s), what + ": " + ps_last_error()};
}

std::string take(char* s) {
    std::string out(s ? s : "");
    ps_string_free(s);
    return out;
}

Json take_json(char* s) { return Json::parse(take(s)); }

template <typename T, void (*Free)(T*)>
struct Deleter {
    void operator()(T* p) const { Free(p); }
};
using Bars = std::unique_ptr<ps_bars, Deleter<ps_bars, ps_bars_free>>;
using Funding = std::unique_ptr<ps_funding, Deleter<ps_funding, ps_funding_free>>;
using Result = std::unique_ptr<ps_result, Deleter<ps_result, ps_result_free>>;
using Study = std::unique_ptr<ps_study, Deleter<ps_study, ps_study_free>>;
using Guard = std::unique_ptr<ps_guard, Deleter<ps_guard, ps_guard_free>>;

struct Options {
    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::string window;
    std::string scenario;
    std::string semantics;
    std::string ledger;
    std::string diagnostic;
};

struct Run {
    Json config;
    fs::path base_dir;  // relative data paths resolve against the config file
    std::string run_id;
    fs::path dir;
};

std::string dump(const Json& j) { return j.dump(); }

Json section(const Json& cfg, const char* key) {
    const auto it = cfg.find(key);
    return it == cfg.end() || it->is_null() ? Json::object() : *it;
}

void allow_keys(const Json& j, std::initializer_list<const char*> keys, const std::string& where) {
    if (!j.is_object()) throw Failure{kData, where + " must be a JSON object"};
    for (const auto& [k, v] : j.items()) {
        if (std::find_if(keys.begin(), keys.end(), [&](const char* a) { return k == a; }) == keys.end()) {
            throw Failure{kData, "unknown key '" + k + "' in " + where};
        }
    }
}

std::string resolve(const Run& run, const std::string& p) {
    const fs::path path(p);
    return (path.is_absolute() ? path : run.base_dir / path).lexically_normal().string();
}

Run load_run(const Options& opt, const std::string& command) {
    Run run;
    if (opt.config_path.empty()) {
        run.config = Json::object();
        run.base_dir = fs::current_path();
    } else {
        std::ifstream in(opt.config_path);
        if (!in) throw Failure{kData, "cannot open config " + opt.config_path};
        try {
            run.config = Json::parse(in);
        } catch (const Json::exception& e) {
            throw Failure{kData, "config " + opt.config_path + " is not valid JSON: " + e.what()};
        }
        if (!run.config.is_object()) throw Failure{kData, "config must be a JSON object"};
        run.base_dir = fs::absolute(opt.config_path).parent_path();
    }
    allow_keys(run.config, {"asset", "data", "windows", "params", "profile", "search", "pool", "screen", "diagnostics",
                            "guard", "audit", "seed", "rf", "selected_window", "selected_scenario", "semantics",
                            "command"},
               "config");
    allow_keys(section(run.config, "data"), {"bars_csv", "funding_csv", "freq_hours", "resample_hours", "gap_tolerance",
                                             "synthetic", "synthetic_funding"},
               "config.data");
    allow_keys(section(run.config, "pool"), {"csv", "size", "params"}, "config.pool");
    allow_keys(section(run.config, "search"), {"sampler", "budget", "tpe"}, "config.search");
    allow_keys(section(run.config, "screen"), {"policy", "scenarios", "rolling", "threshold_scan"}, "config.screen");
    allow_keys(section(run.config, "diagnostics"), {"dsr", "pbo", "bootstrap", "ablation", "dd_policy"},
               "config.diagnostics");
    allow_keys(section(run.config, "audit"), {"ledger", "tolerance"}, "config.audit");
    // Command-line selections become part of the digested config.
    if (opt.seed) run.config["seed"] = *opt.seed;
    if (!run.config.contains("seed")) run.config["seed"] = 0;
    if (!opt.window.empty()) run.config["selected_window"] = opt.window;
    if (!opt.scenario.empty()) run.config["selected_scenario"] = opt.scenario;
    if (!opt.semantics.empty()) run.config["semantics"] = opt.semantics;
    run.config["command"] = command;

    char* hex = nullptr;
    check(ps_digest_json(dump(run.config).c_str(), &hex), "config digest");
    run.run_id = take(hex).substr(0, 16);
    run.dir = fs::path(opt.out_dir) / run.run_id;
    std::error_code ec;
    fs::create_directories(run.dir, ec);
    if (ec) throw Failure{kData, "cannot create " + run.dir.string() + ": " + ec.message()};
    // One writer per run directory; the lock is released when the process exits.
    const int fd = ::open((run.dir / ".lock").c_str(), O_CREAT | O_RDWR, 0644);
    if (fd < 0 || ::flock(fd, LOCK_EX | LOCK_NB) != 0) {
        throw Failure{kData, "run directory " + run.dir.string() + " is locked by another process"};
    }
    std::ofstream(run.dir / "config.json") << run.config.dump(2) << "\n";
    return run;
}

std::string artifact(const Run& run, const std::string& name) { return (run.dir / name).string(); }

void write_json(const Run& run, const std::string& name, Json j) {
    j["run_id"] = run.run_id;
    std::ofstream out(artifact(run, name));
    if (!out) throw Failure{kData, "cannot write " + artifact(run, name)};
    out << j.dump(2) << "\n";
}

// --- data -----------------------------------------------------------------

struct Data {
    Bars bars;
    Funding funding;
};

Bars load_bars(const Run& run) {
    const Json data = section(run.config, "data");
    const int freq = data.value("freq_hours", 4);
    ps_bars* raw = nullptr;
    if (data.contains("bars_csv")) {
        check(ps_bars_load_csv(resolve(run, data["bars_csv"].get<std::string>()).c_str(), freq, &raw), "load bars");
    } else {
        Json settings = section(data, "synthetic");
        if (!settings.contains("seed")) settings["seed"] = run.config["seed"];
        check(ps_bars_synthesize(dump(settings).c_str(), &raw), "synthesize bars");
    }
    Bars bars(raw);
    if (data.contains("resample_hours")) {
        ps_bars* res = nullptr;
        check(ps_bars_resample(bars.get(), data["resample_hours"].get<int>(), &res), "resample");
        bars.reset(res);
    }
    return bars;
}

double fallback_rate(const Run& run) {
    return section(run.config, "profile").value("fallback_rate_8h", 0.0001);
}

Data load_data(const Run& run) {
    Data d{load_bars(run), nullptr};
    const Json data = section(run.config, "data");
    ps_funding* f = nullptr;
    if (data.contains("funding_csv")) {
        check(ps_funding_load_csv(resolve(run, data["funding_csv"].get<std::string>()).c_str(), fallback_rate(run), &f),
              "load funding");
    } else {
        check(ps_funding_synthesize(d.bars.get(), dump(section(data, "synthetic_funding")).c_str(), &f),
              "synthesize funding");
    }
    d.funding.reset(f);
    return d;
}

// --- selections -------------------------------------------------------------

Json select_window(const Run& run, const ps_bars* bars) {
    const std::string wanted = run.config.value("selected_window", "");
    const Json windows = run.config.value("windows", Json::array());
    if (wanted.empty() || wanted == "full") {
        if (wanted.empty() && !windows.empty()) return windows.front();
        char* w = nullptr;
        check(ps_bars_full_window(bars, "full", &w), "full window");
        return take_json(w);
    }
    for (const Json& w : windows) {
        if (w.value("name", "") == wanted) return w;
    }
    throw Failure{kUsage, "no window named '" + wanted + "' in config"};
}

// Returns {label, profile}: "baseline" is the configured profile.
std::pair<std::string, Json> select_scenario(const Run& run) {
    const Json profile = section(run.config, "profile");
    const std::string wanted = run.config.value("selected_scenario", "baseline");
    if (wanted == "baseline") return {wanted, profile};
    char* out = nullptr;
    check(ps_scenarios(dump(profile).c_str(), &out), "scenario grid");
    for (const Json& s : take_json(out)) {
        if (s["label"] == wanted) return {wanted, s["profile"]};
    }
    throw Failure{kUsage, "unknown scenario '" + wanted + "'"};
}

std::string semantics(const Run& run) { return run.config.value("semantics", "strict"); }

Json params(const Run& run) { return section(run.config, "params"); }

// Pool request keys shared by screening and pool diagnostics.
Json pool_request(const Run& run) {
    const Json pool = section(run.config, "pool");
    Json req = Json::object();
    if (pool.contains("params")) {
        req["pool"] = pool["params"];
    } else if (pool.contains("csv")) {
        req["pool_csv"] = resolve(run, pool["csv"].get<std::string>());
        if (pool.contains("size")) req["pool_size"] = pool["size"];
    } else {
        throw Failure{kUsage, "config needs pool.csv or pool.params"};
    }
    return req;
}

// --- output -----------------------------------------------------------------

std::string fmt(const Json& v) {
    if (v.is_number_float()) {
        std::ostringstream s;
        s << std::setprecision(6) << v.get<double>();
        return s.str();
    }
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

void table(const std::string& title, const std::vector<std::pair<std::string, Json>>& rows) {
    std::size_t w = 0;
    for (const auto& [k, v] : rows) w = std::max(w, k.size());
    std::cout << title << "\n";
    for (const auto& [k, v] : rows) std::cout << "  " << std::left << std::setw(static_cast<int>(w) + 2) << k << fmt(v) << "\n";
}

void metrics_table(const std::string& title, const Json& m) {
    table(title, {{"ann_return", m["ann_return"]},
                  {"sharpe", m["sharpe"]},
                  {"max_dd", m["max_dd"]},
                  {"monthly_geom", m["monthly_geom"]},
                  {"trades", m["trades"]},
                  {"switch_density", m["switch_density"]},
                  {"n_bars", m["n_bars"]}});
}

// --- commands ---------------------------------------------------------------

int cmd_synth(const Run& run) {
    const Data d = load_data(run);
    check(ps_bars_write_csv(d.bars.get(), artifact(run, "bars.csv").c_str()), "write bars");
    check(ps_funding_write_csv(d.funding.get(), artifact(run, "funding.csv").c_str()), "write funding");
    table("synth " + run.run_id, {{"bars", ps_bars_count(d.bars.get())}, {"dir", run.dir.string()}});
    return kOk;
}

int cmd_validate(const Run& run) {
    const Bars bars = load_bars(run);
    const std::size_t tol = section(run.config, "data").value("gap_tolerance", std::size_t{0});
    char* out = nullptr;
    check(ps_bars_validate(bars.get(), tol, &out), "validate");
    const Json report = take_json(out);
    write_json(run, "validation.json", report);
    table("validate " + run.run_id, {{"bars", ps_bars_count(bars.get())},
                                     {"gaps", report["n_gaps"]},
                                     {"sanity_violations", report["sanity_violations"].size()},
                                     {"fatal", report["fatal"]}});
    if (report["fatal"].get<bool>()) {
        std::cerr << "error: data integrity failure, pipeline halted\n";
        return kData;
    }
    return kOk;
}

Result backtest(const Run& run, const Data& d, const Json& window, const Json& profile) {
    ps_result* r = nullptr;
    check(ps_backtest(d.bars.get(), d.funding.get(), dump(params(run)).c_str(), dump(profile).c_str(),
                      dump(window).c_str(), semantics(run).c_str(), &r),
          "backtest");
    return Result(r);
}

int cmd_backtest(const Run& run) {
    const Data d = load_data(run);
    const Json window = select_window(run, d.bars.get());
    const auto [label, profile] = select_scenario(run);
    const Result r = backtest(run, d, window, profile);
    const std::string stem = window["name"].get<std::string>() + "_" + label;
    check(ps_result_write_ledger(r.get(), artifact(run, "ledger_" + stem + ".csv").c_str(), run.run_id.c_str()),
          "write ledger");
    char* m = nullptr;
    check(ps_result_metrics(r.get(), run.config.value("rf", 0.03), &m), "metrics");
    const Json metrics = take_json(m);
    write_json(run, "metrics_" + stem + ".json", metrics);
    metrics_table("backtest " + run.run_id + " window=" + window["name"].get<std::string>() + " scenario=" + label +
                      " semantics=" + semantics(run),
                  metrics);
    return kOk;
}

int cmd_tune(const Run& run) {
    const Data d = load_data(run);
    const Json search = section(run.config, "search");
    Json req{{"profile", section(run.config, "profile")},
             {"window", select_window(run, d.bars.get())},
             {"sampler", search.value("sampler", "tpe")},
             {"budget", search.value("budget", 120)},
             {"seed", run.config["seed"]}};
    if (search.contains("tpe")) req["tpe"] = search["tpe"];
    ps_study* s = nullptr;
    check(ps_study_run(d.bars.get(), d.funding.get(), dump(req).c_str(), &s), "study");
    const Study study(s);
    check(ps_study_write(study.get(), artifact(run, "study.csv").c_str(), artifact(run, "best_so_far.csv").c_str(),
                         run.run_id.c_str()),
          "write study");
    char* out = nullptr;
    check(ps_study_summary(study.get(), &out), "study summary");
    const Json summary = take_json(out);
    write_json(run, "study_summary.json", summary);
    table("tune " + run.run_id, {{"sampler", summary["sampler"]},
                                 {"trials", summary["n_trials"]},
                                 {"best_trial_id", summary["best_trial_id"]},
                                 {"best_score", summary["best_score"]}});
    std::cout << "  budget  best_score  best_trial_id\n";
    for (const Json& row : summary["best_so_far"]) {
        std::cout << "  " << std::setw(6) << row["budget"].get<std::size_t>() << "  " << std::setw(10)
                  << fmt(row["best_score"]) << "  " << row["best_trial_id"].get<std::size_t>() << "\n";
    }
    return kOk;
}

int cmd_screen(const Run& run) {
    const Data d = load_data(run);
    const Json screen = section(run.config, "screen");
    Json req = pool_request(run);
    req["profile"] = section(run.config, "profile");
    req["window"] = select_window(run, d.bars.get());
    req["run_id"] = run.run_id;
    for (const char* key : {"policy", "scenarios", "rolling", "threshold_scan"}) {
        if (screen.contains(key)) req[key] = screen[key];
    }
    req["outputs"] = {{"robust_summary", artifact(run, "robust_summary.csv")},
                      {"aggregates", artifact(run, "aggregates.csv")},
                      {"threshold_scan", artifact(run, "threshold_scan.csv")},
                      {"window_summary", artifact(run, "window_summary.csv")}};
    char* out = nullptr;
    check(ps_screen(d.bars.get(), d.funding.get(), dump(req).c_str(), &out), "screen");
    const Json report = take_json(out);
    write_json(run, "screen_report.json", report);
    table("screen " + run.run_id, {{"pool_size", report["pool_size"]},
                                   {"scenarios", report["n_scenarios"]},
                                   {"backtests", report["n_backtests"]},
                                   {"passing", report["passing"].size()},
                                   {"top_k", report["top_k"]}});
    return kOk;
}

int diag_dsr(const Run& run) {
    const Json cfg = section(section(run.config, "diagnostics"), "dsr");
    char* out = nullptr;
    if (cfg.contains("sr_hat")) {
        check(ps_dsr(dump(cfg).c_str(), &out), "dsr");
    } else {
        const Data d = load_data(run);
        Json req = pool_request(run);
        req["profile"] = section(run.config, "profile");
        req["window"] = select_window(run, d.bars.get());
        if (cfg.contains("trials_multiplier")) req["trials_multiplier"] = cfg["trials_multiplier"];
        check(ps_dsr_from_pool(d.bars.get(), d.funding.get(), dump(req).c_str(), &out), "dsr");
    }
    const Json r = take_json(out);
    write_json(run, "dsr.json", r);
    table("diagnose dsr " + run.run_id, {{"sr_hat", r.value("sr_hat", Json())},
                                         {"n_trials", r.value("n_trials", Json())},
                                         {"sr0", r.value("sr0", Json())},
                                         {"dsr", r["dsr"]}});
    return kOk;
}

int diag_pbo(const Run& run) {
    const Data d = load_data(run);
    const Json cfg = section(section(run.config, "diagnostics"), "pbo");
    Json req = pool_request(run);
    req["profile"] = section(run.config, "profile");
    req["window"] = select_window(run, d.bars.get());
    if (cfg.contains("n_segments")) req["n_segments"] = cfg["n_segments"];
    char* out = nullptr;
    check(ps_pbo(d.bars.get(), d.funding.get(), dump(req).c_str(), &out), "pbo");
    const Json r = take_json(out);
    write_json(run, "pbo.json", r);
    table("diagnose pbo " + run.run_id,
          {{"candidates", r["candidate_ids"].size()}, {"months", r["n_months"]}, {"splits", r["n_splits"]}, {"pbo", r["pbo"]}});
    return kOk;
}

int diag_bootstrap(const Run& run) {
    const Data d = load_data(run);
    Json req = section(section(run.config, "diagnostics"), "bootstrap");
    req["params"] = params(run);
    req["profile"] = section(run.config, "profile");
    req["window"] = select_window(run, d.bars.get());
    if (!req.contains("seed")) req["seed"] = run.config["seed"];
    char* out = nullptr;
    check(ps_bootstrap_backtest(d.bars.get(), d.funding.get(), dump(req).c_str(), &out), "bootstrap");
    const Json r = take_json(out);
    write_json(run, "bootstrap.json", r);
    table("diagnose bootstrap " + run.run_id, {{"baseline", r["baseline"]},
                                               {"months", r["n_months"]},
                                               {"delta", r["estimate"]},
                                               {"lower", r["lower"]},
                                               {"upper", r["upper"]}});
    return kOk;
}

int diag_ablation(const Run& run) {
    const Data d = load_data(run);
    Json req = section(section(run.config, "diagnostics"), "ablation");
    req["params"] = params(run);
    req["profile"] = section(run.config, "profile");
    req["window"] = select_window(run, d.bars.get());
    char* out = nullptr;
    check(ps_ablation(d.bars.get(), d.funding.get(), dump(req).c_str(), &out), "ablation");
    const Json r = take_json(out);
    write_json(run, "ablation.json", r);
    std::cout << "diagnose ablation " << run.run_id << "\n  variant     ann_return  sharpe    max_dd    trades\n";
    auto line = [](const Json& v) {
        std::cout << "  " << std::left << std::setw(10) << v["label"].get<std::string>() << "  " << std::setw(10)
                  << fmt(v["ann_return"]) << "  " << std::setw(10) << fmt(v["sharpe"]) << "  " << std::setw(10)
                  << fmt(v["max_dd"]) << "  " << v["trades"] << "\n";
    };
    for (const Json& v : r["cost_ladder"]) line(v);
    line(r["funding_gates"]["gates_on"]);
    line(r["funding_gates"]["gates_off"]);
    return kOk;
}

int diag_semantics(const Run& run) {
    const Data d = load_data(run);
    Json req = pool_request(run);
    req["profile"] = section(run.config, "profile");
    req["window"] = select_window(run, d.bars.get());
    char* out = nullptr;
    check(ps_uplift(d.bars.get(), d.funding.get(), dump(req).c_str(), &out), "uplift");
    const Json r = take_json(out);
    write_json(run, "semantics_uplift.json", r);
    table("diagnose semantics " + run.run_id, {{"N", r["N"]},
                                               {"median", r["median"]},
                                               {"p25", r["p25"]},
                                               {"p75", r["p75"]},
                                               {"frac_positive", r["frac_positive"]}});
    return kOk;
}

int diag_ddbucket(const Run& run) {
    const Data d = load_data(run);
    const Json window = select_window(run, d.bars.get());
    const auto [label, profile] = select_scenario(run);
    const Result base = backtest(run, d, window, profile);
    const Json policy = section(section(run.config, "diagnostics"), "dd_policy");
    ps_result* o = nullptr;
    check(ps_result_dd_overlay(base.get(), dump(policy).c_str(), &o), "overlay");
    const Result overlay(o);
    const std::string stem = window["name"].get<std::string>() + "_" + label;
    check(ps_result_write_ledger(overlay.get(), artifact(run, "ledger_" + stem + "_ddbucket.csv").c_str(),
                                 run.run_id.c_str()),
          "write ledger");
    const double rf = run.config.value("rf", 0.03);
    char* a = nullptr;
    char* b = nullptr;
    check(ps_result_metrics(base.get(), rf, &a), "metrics");
    check(ps_result_metrics(overlay.get(), rf, &b), "metrics");
    const Json ma = take_json(a), mb = take_json(b);
    write_json(run, "ddbucket.json", {{"base", ma}, {"overlay", mb}, {"policy", policy}});
    metrics_table("diagnose ddbucket " + run.run_id + " (base)", ma);
    metrics_table("diagnose ddbucket " + run.run_id + " (overlay)", mb);
    return kOk;
}

int cmd_diagnose(const Run& run, const std::string& which) {
    if (which == "dsr") return diag_dsr(run);
    if (which == "pbo") return diag_pbo(run);
    if (which == "bootstrap") return diag_bootstrap(run);
    if (which == "ablation") return diag_ablation(run);
    if (which == "semantics") return diag_semantics(run);
    if (which == "ddbucket") return diag_ddbucket(run);
    throw Failure{kUsage, "unknown diagnostic '" + which + "'"};
}

int cmd_audit(const Run& run, const Options& opt) {
    const Data d = load_data(run);
    const Json window = select_window(run, d.bars.get());
    const auto [label, profile] = select_scenario(run);
    const Json cfg = section(run.config, "audit");
    std::string ledger = opt.ledger;
    if (ledger.empty() && cfg.contains("ledger")) ledger = resolve(run, cfg["ledger"].get<std::string>());
    if (ledger.empty()) {
        // No reference given: produce one with this engine, then replay it.
        ledger = artifact(run, "ledger_" + window["name"].get<std::string>() + "_" + label + ".csv");
        const Result r = backtest(run, d, window, profile);
        check(ps_result_write_ledger(r.get(), ledger.c_str(), run.run_id.c_str()), "write ledger");
    }
    const Json req{{"params", params(run)}, {"profile", profile}, {"window", window}, {"semantics", semantics(run)}};
    char* out = nullptr;
    check(ps_audit_replay(d.bars.get(), d.funding.get(), dump(req).c_str(), ledger.c_str(),
                          cfg.value("tolerance", 1e-9), &out),
          "audit");
    const Json r = take_json(out);
    write_json(run, "audit.json", r);
    table("audit " + run.run_id, {{"n_bars", r["n_bars"]},
                                  {"max_abs_signal_diff", r["max_abs_signal_diff"]},
                                  {"max_abs_exposure_diff", r["max_abs_exposure_diff"]},
                                  {"trades_diff", r["trades_diff"]},
                                  {"fees_diff", r["fees_diff"]},
                                  {"slip_diff", r["slip_diff"]},
                                  {"fund_diff", r["fund_diff"]},
                                  {"pass", r["pass"]}});
    return r["pass"].get<bool>() ? kOk : kContract;
}

int cmd_guard(const Run& run) {
    const Data d = load_data(run);
    const Json window = select_window(run, d.bars.get());
    const auto [label, profile] = select_scenario(run);
    const Result r = backtest(run, d, window, profile);
    ps_guard* g = nullptr;
    check(ps_guard_create(dump(section(run.config, "guard")).c_str(), &g), "guard config");
    const Guard guard(g);
    const std::size_t n = ps_result_rows(r.get());
    std::vector<ps_guard_row> rows(n);
    for (std::size_t i = 0; i < n; ++i) {
        ps_ledger_row row;
        check(ps_result_row(r.get(), i, &row), "ledger row");
        rows[i] = {row.timestamp, row.r_net, row.exposure};
    }
    std::vector<ps_guard_decision> decisions(n);
    std::vector<double> exposure(n);
    check(ps_guard_step(guard.get(), rows.data(), n, decisions.data(), exposure.data()), "guard");
    check(ps_guard_write_log(guard.get(), artifact(run, "guard_log.csv").c_str(), run.run_id.c_str()), "write log");
    std::size_t counts[3] = {0, 0, 0};
    for (auto dcs : decisions) ++counts[dcs];
    static const char* names[] = {"ok", "watch", "kill"};
    write_json(run, "guard_summary.json", {{"ok", counts[0]},
                                           {"watch", counts[1]},
                                           {"kill", counts[2]},
                                           {"final", names[ps_guard_state(guard.get())]}});
    table("guard " + run.run_id, {{"rows", n},
                                  {"ok", counts[0]},
                                  {"watch", counts[1]},
                                  {"kill", counts[2]},
                                  {"final", names[ps_guard_state(guard.get())]}});
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"perpsieve: two-stage screening of perpetual-futures strategies"};
    app.require_subcommand(1);
    Options opt;
    std::uint64_t seed = 0;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config_path, "run configuration (JSON)");
        sub->add_option("--out", opt.out_dir, "output root; artifacts go to <out>/<run_id>/");
        sub->add_option("--seed", seed, "seed override")->each([&](const std::string&) { opt.seed = seed; });
        sub->add_option("--window", opt.window, "window name from the config, or 'full'");
        sub->add_option("--scenario", opt.scenario, "cost scenario label, or 'baseline'");
        sub->add_option("--semantics", opt.semantics, "execution semantics")
            ->check(CLI::IsMember({"strict", "naive"}));
    };
    std::vector<std::pair<std::string, CLI::App*>> subs;
    for (const auto& [name, help] : std::vector<std::pair<std::string, std::string>>{
             {"validate", "check bar data integrity"},
             {"backtest", "single strict backtest with ledger and metrics"},
             {"tune", "Stage I parameter search"},
             {"screen", "Stage II scenario and window screening"},
             {"diagnose", "overfitting and robustness diagnostics"},
             {"audit", "replay a ledger and reconcile it"},
             {"guard", "stream a ledger through the ok/watch/kill guard"},
             {"synth", "write synthetic bars and funding"}}) {
        CLI::App* sub = app.add_subcommand(name, help);
        common(sub);
        subs.emplace_back(name, sub);
    }
    CLI::App* diagnose = app.get_subcommand("diagnose");
    diagnose->add_option("kind", opt.diagnostic, "diagnostic")
        ->required()
        ->check(CLI::IsMember({"dsr", "pbo", "bootstrap", "ablation", "semantics", "ddbucket"}));
    app.get_subcommand("audit")->add_option("--ledger", opt.ledger, "reference ledger CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    std::string command;
    for (const auto& [name, sub] : subs) {
        if (sub->parsed()) command = name;
    }
    try {
        const Run run = load_run(opt, command == "diagnose" ? "diagnose:" + opt.diagnostic : command);
        if (command == "validate") return cmd_validate(run);
        if (command == "backtest") return cmd_backtest(run);
        if (command == "tune") return cmd_tune(run);
        if (command == "screen") return cmd_screen(run);
        if (command == "diagnose") return cmd_diagnose(run, opt.diagnostic);
        if (command == "audit") return cmd_audit(run, opt);
        if (command == "guard") return cmd_guard(run);
        if (command == "synth") return cmd_synth(run);
        return kUsage;
    } catch (const Failure& f) {
        std::cerr << "error: " << f.message << "\n";
        return f.code;
    } catch (const Json::exception& e) {
        std::cerr << "error: malformed configuration: " << e.what() << "\n";
        return kUsage;
    }
}
