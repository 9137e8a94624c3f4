#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "../support/synth.hpp"
#include "perpsieve/error.hpp"

using namespace perpsieve;

namespace {

SearchSpace toy_space() {
    SearchSpace s;
    s.dims = {{"x", 0.0, 1.0, false}, {"y", 0.0, 1.0, false}, {"n", 1.0, 20.0, true}};
    return s;
}

constexpr double kOpt[3] = {0.8, 0.3, 15.0};

double toy_distance(std::span<const double> x) {
    const double dn = (x[2] - kOpt[2]) / 19.0;
    return std::sqrt((x[0] - kOpt[0]) * (x[0] - kOpt[0]) + (x[1] - kOpt[1]) * (x[1] - kOpt[1]) + dn * dn);
}

double toy_objective(std::span<const double> x) { return -toy_distance(x); }

}  // namespace

TEST_CASE("startup suggestions are uniform within bounds and feasible") {
    const SearchSpace space = strategy_space();
    CHECK(space.size() == 15);
    StudyHistory h;
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        const auto x = suggest(h, space, Sampler::Tpe, seed);
        CHECK(space.contains(x));
        const StrategyParams p = params_from_vector(x);
        CHECK(p.ema_fast < p.ema_slow);
        CHECK_NOTHROW(p.validate());
    }
}

TEST_CASE("suggestions are deterministic in seed and history") {
    const SearchSpace space = strategy_space();
    const StudyHistory h = run_study([](std::span<const double> x) { return x[2]; }, space, 15, Sampler::Tpe, 3);
    CHECK(suggest(h, space, Sampler::Tpe, 77) == suggest(h, space, Sampler::Tpe, 77));
    CHECK(suggest(h, space, Sampler::Random, 77) == suggest(h, space, Sampler::Random, 77));
}

TEST_CASE("params vector round trip") {
    perpsieve::Rng rng(2);
    for (int i = 0; i < 200; ++i) {
        const StrategyParams p = fixtures::random_params(rng);
        CHECK(params_from_vector(params_to_vector(p)) == p);
    }
}

TEST_CASE("study reproducibility and shape") {
    const SearchSpace space = toy_space();
    const StudyHistory a = run_study(toy_objective, space, 40, Sampler::Tpe, 9);
    const StudyHistory b = run_study(toy_objective, space, 40, Sampler::Tpe, 9);
    REQUIRE(a.trials.size() == 40);
    for (std::size_t i = 0; i < 40; ++i) {
        CHECK(a.trials[i].id == i + 1);
        CHECK(a.trials[i].x == b.trials[i].x);
        CHECK(a.trials[i].score == b.trials[i].score);
        CHECK(space.contains(a.trials[i].x));
        CHECK(a.trials[i].x[2] == std::round(a.trials[i].x[2]));
    }
    CHECK(a.space_digest == space.digest());
    const StudyHistory c = run_study(toy_objective, space, 40, Sampler::Tpe, 10);
    CHECK(c.trials[0].x != a.trials[0].x);
}

TEST_CASE("TPE concentrates near the optimum after 100 trials") {
    const SearchSpace space = toy_space();
    double tpe_sum = 0, uni_sum = 0;
    int n = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const StudyHistory h = run_study(toy_objective, space, 100, Sampler::Tpe, seed);
        const StudyHistory r = run_study(toy_objective, space, 100, Sampler::Random, seed);
        for (std::size_t i = 50; i < 100; ++i) {
            tpe_sum += toy_distance(h.trials[i].x);
            uni_sum += toy_distance(r.trials[i].x);
            ++n;
        }
    }
    MESSAGE("mean distance tpe " << tpe_sum / n << " uniform " << uni_sum / n);
    CHECK(tpe_sum / n < uni_sum / n);
}

TEST_CASE("TPE median best beats random on a smooth objective") {
    const SearchSpace space = toy_space();
    std::vector<double> tpe, rnd;
    for (std::uint64_t seed = 100; seed < 120; ++seed) {
        auto best = [](const StudyHistory& h) {
            double b = -1e300;
            for (const auto& t : h.trials) b = std::max(b, t.score);
            return b;
        };
        tpe.push_back(best(run_study(toy_objective, space, 40, Sampler::Tpe, seed)));
        rnd.push_back(best(run_study(toy_objective, space, 40, Sampler::Random, seed)));
    }
    std::sort(tpe.begin(), tpe.end());
    std::sort(rnd.begin(), rnd.end());
    CHECK((tpe[9] + tpe[10]) / 2 >= (rnd[9] + rnd[10]) / 2);
}

TEST_CASE("best-so-far curve") {
    const SearchSpace space = toy_space();
    SUBCASE("checkpoints and running maximum") {
        const StudyHistory h = run_study(toy_objective, space, 120, Sampler::Tpe, 4);
        const auto curve = best_so_far(h);
        std::vector<std::size_t> budgets;
        for (const auto& r : curve) budgets.push_back(r.budget);
        CHECK(budgets == std::vector<std::size_t>{10, 20, 40, 60, 80, 100, 120});
        for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i].best_score >= curve[i - 1].best_score);
        for (const auto& r : curve) {
            double b = -1e300;
            std::size_t id = 0;
            for (std::size_t k = 0; k < r.budget; ++k) {
                if (h.trials[k].score > b) {
                    b = h.trials[k].score;
                    id = h.trials[k].id;
                }
            }
            CHECK(r.best_score == b);
            CHECK(r.best_trial_id == id);
        }
    }
    SUBCASE("budget 1") {
        const auto curve = best_so_far(run_study(toy_objective, space, 1, Sampler::Tpe, 4));
        REQUIRE(curve.size() == 1);
        CHECK(curve[0].budget == 1);
        CHECK(curve[0].best_trial_id == 1);
    }
    SUBCASE("budget 45 ends with the final trial") {
        const auto curve = best_so_far(run_study(toy_objective, space, 45, Sampler::Random, 4));
        REQUIRE(curve.size() == 4);
        CHECK(curve.back().budget == 45);
    }
    SUBCASE("zero budget rejected") {
        CHECK_THROWS_AS(run_study(toy_objective, space, 0, Sampler::Tpe, 4), Error);
    }
}

TEST_CASE("failing objectives record the sentinel and the study continues") {
    const SearchSpace space = toy_space();
    std::size_t calls = 0;
    const Objective obj = [&](std::span<const double> x) -> double {
        ++calls;
        if (calls % 3 == 0) throw std::runtime_error("boom");
        if (calls % 3 == 1) return std::nan("");
        return -toy_distance(x) - 2.0;  // below the sentinel
    };
    const StudyHistory h = run_study(obj, space, 30, Sampler::Tpe, 1);
    CHECK(h.trials.size() == 30);
    for (std::size_t i = 0; i < 30; ++i) {
        if ((i + 1) % 3 != 2) CHECK(h.trials[i].score == kSentinelScore);
    }
}

TEST_CASE("sentinels never win best-so-far unless every trial is a sentinel") {
    const SearchSpace space = toy_space();
    const StudyHistory all_bad =
        run_study([](std::span<const double>) -> double { throw std::runtime_error("x"); }, space, 12, Sampler::Tpe, 2);
    const auto c = best_so_far(all_bad);
    CHECK(c.front().best_score == kSentinelScore);
    CHECK(c.front().best_trial_id == 1);
    std::size_t k = 0;
    const StudyHistory some = run_study(
        [&](std::span<const double> x) -> double {
            if (++k == 1) throw std::runtime_error("x");
            return -2.0 - x[0];
        },
        space, 12, Sampler::Tpe, 2);
    for (const auto& row : best_so_far(some)) CHECK(row.best_trial_id != 1);
}

TEST_CASE("top_k orders by score then id") {
    StudyHistory h;
    h.trials = {{1, {}, 0.1}, {2, {}, 0.3}, {3, {}, 0.3}, {4, {}, -1.0}, {5, {}, 0.2}};
    CHECK(top_k(h, 3) == std::vector<std::size_t>{2, 3, 5});
    CHECK(top_k(h, 10).size() == 5);
}

TEST_CASE("backtest objective scores strict annualized return") {
    const fixtures::Run run = fixtures::random_run(77, 400);
    const WindowSpec w = full_window(run.series);
    const Objective obj = backtest_objective(run.series, run.funding, run.profile, w);
    const auto x = params_to_vector(run.params);
    const BacktestResult r = run_backtest(run.series, run.funding, run.params, run.profile, w);
    CHECK(obj(x) == metrics(r, 0.0).ann_return);
}

TEST_CASE("study CSV round trip") {
    const fixtures::Run run = fixtures::random_run(78, 300);
    const SearchSpace space = strategy_space();
    const StudyHistory h =
        run_study(backtest_objective(run.series, run.funding, run.profile, full_window(run.series)), space, 12,
                  Sampler::Tpe, 5);
    const auto dir = std::filesystem::temp_directory_path() / "perpsieve_unit";
    const std::string path = (dir / "study.csv").string();
    write_study_csv(h, path, "rid");
    const auto rows = read_study_csv(path);
    REQUIRE(rows.size() == 12);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].trial_id == h.trials[i].id);
        CHECK(rows[i].score == h.trials[i].score);
        CHECK(rows[i].params == params_from_vector(h.trials[i].x));
    }
    const std::string bpath = (dir / "best.csv").string();
    const auto curve = best_so_far(h);
    write_best_so_far_csv(curve, bpath, "rid");
    CHECK(std::filesystem::file_size(bpath) > 0);
}

TEST_CASE("sampler names") {
    CHECK(sampler_from_string("tpe") == Sampler::Tpe);
    CHECK(sampler_from_string("random") == Sampler::Random);
    CHECK_THROWS_AS(sampler_from_string("gp"), Error);
}
