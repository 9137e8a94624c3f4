#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "perpsieve/engine.hpp"
#include "perpsieve/rng.hpp"
#include "perpsieve/signal.hpp"

namespace perpsieve {

inline constexpr double kSentinelScore = -1.0;

struct Dimension {
    std::string name;
    double lo = 0.0;
    double hi = 1.0;
    bool integer = false;
};

struct SearchSpace {
    std::vector<Dimension> dims;
    // Hard constraint; suggestions violating it are redrawn.
    std::function<bool(std::span<const double>)> feasible;

    std::size_t size() const noexcept { return dims.size(); }
    bool contains(std::span<const double> x) const;
    std::string digest() const;
};

enum class Sampler { Tpe, Random };

const char* to_string(Sampler s) noexcept;
Sampler sampler_from_string(const std::string& s);

struct TpeSettings {
    double gamma = 0.25;
    std::size_t n_startup = 10;
    std::size_t n_ei_candidates = 24;
    double prior_weight = 1.0;
};

struct Trial {
    std::size_t id = 0;  // 1-based
    std::vector<double> x;
    double score = kSentinelScore;
};

struct StudyHistory {
    std::vector<Trial> trials;
    std::uint64_t seed = 0;
    Sampler sampler = Sampler::Tpe;
    std::string space_digest;
};

struct BestSoFarRow {
    std::size_t budget = 0;
    double best_score = kSentinelScore;
    std::size_t best_trial_id = 0;
};

/// Next point to evaluate. Deterministic in (history, space, seed).
std::vector<double> suggest(const StudyHistory& history, const SearchSpace& space, Sampler sampler,
                            std::uint64_t seed, const TpeSettings& tpe = {});

using Objective = std::function<double(std::span<const double>)>;

/// Sequential study; throwing or non-finite objectives record the sentinel score.
StudyHistory run_study(const Objective& objective, const SearchSpace& space, std::size_t budget, Sampler sampler,
                       std::uint64_t seed, const TpeSettings& tpe = {});

/// Running maximum at checkpoints {10,20,40,60,80,100,120} within the budget, plus the final trial.
std::vector<BestSoFarRow> best_so_far(const StudyHistory& history);

/// Trial ids of the k best scores, ties by id.
std::vector<std::size_t> top_k(const StudyHistory& history, std::size_t k);

// Strategy-parameter space.
SearchSpace strategy_space();
StrategyParams params_from_vector(std::span<const double> x);
std::vector<double> params_to_vector(const StrategyParams& p);

/// Stage I score: annualized net return of a strict backtest on the window (-1 when ruined).
Objective backtest_objective(const BarSeries& series, const FundingSeries& funding, const CostProfile& profile,
                             const WindowSpec& window);

struct StudyRow {
    std::size_t trial_id = 0;
    double score = kSentinelScore;
    StrategyParams params;
};

// study.csv: trial_id,score,params_json (params_json is a quoted CSV field).
inline constexpr const char* kStudyHeader = "trial_id,score,params_json";
inline constexpr const char* kBestSoFarHeader = "budget,best_score,best_trial_id";

void write_study_csv(const StudyHistory& history, const std::string& path, const std::string& run_id = {});
std::vector<StudyRow> read_study_csv(const std::string& path);
void write_best_so_far_csv(std::span<const BestSoFarRow> rows, const std::string& path,
                           const std::string& run_id = {});

}  // namespace perpsieve
