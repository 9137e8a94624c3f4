#include "perpsieve/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "perpsieve/config.hpp"
#include "perpsieve/csv.hpp"
#include "perpsieve/error.hpp"
#include "perpsieve/stats.hpp"

namespace perpsieve {

const char* to_string(Sampler s) noexcept { return s == Sampler::Tpe ? "tpe" : "random"; }

Sampler sampler_from_string(const std::string& s) {
    if (s == "tpe") return Sampler::Tpe;
    if (s == "random") return Sampler::Random;
    fail(ErrorKind::InvalidArgument, "unknown sampler '" + s + "' (expected tpe|random)");
}

bool SearchSpace::contains(std::span<const double> x) const {
    if (x.size() != dims.size()) return false;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (!(x[i] >= dims[i].lo && x[i] <= dims[i].hi)) return false;
        if (dims[i].integer && x[i] != std::round(x[i])) return false;
    }
    return !feasible || feasible(x);
}

std::string SearchSpace::digest() const {
    Json j = Json::array();
    for (const auto& d : dims) j.push_back({{"name", d.name}, {"lo", d.lo}, {"hi", d.hi}, {"integer", d.integer}});
    return digest_of(j);
}

namespace {

constexpr int kMaxRedraws = 1000;

std::vector<double> uniform_point(const SearchSpace& space, Rng& rng) {
    std::vector<double> x(space.size());
    for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
        for (std::size_t i = 0; i < space.size(); ++i) {
            const Dimension& d = space.dims[i];
            if (d.integer) {
                const auto span = static_cast<std::uint64_t>(d.hi - d.lo) + 1;
                x[i] = d.lo + static_cast<double>(rng.below(span));
            } else {
                x[i] = rng.uniform(d.lo, d.hi);
            }
        }
        if (!space.feasible || space.feasible(x)) return x;
    }
    fail(ErrorKind::Numerical, "could not draw a feasible point from the search space");
}

// Univariate truncated-Gaussian mixture over one dimension. Integer dimensions
// live on [lo - 0.5, hi + 0.5] and are scored by the mass of their unit cell.
class ParzenEstimator {
public:
    ParzenEstimator(const std::vector<double>& obs, const Dimension& dim, double prior_weight)
        : integer_(dim.integer),
          lo_(dim.integer ? dim.lo - 0.5 : dim.lo),
          hi_(dim.integer ? dim.hi + 0.5 : dim.hi) {
        const double range = hi_ - lo_;
        const double prior_mu = 0.5 * (lo_ + hi_);

        struct Component {
            double mu;
            double weight;
            bool prior;
        };
        std::vector<Component> pts;
        for (double v : obs) pts.push_back({v, 1.0, false});
        pts.push_back({prior_mu, prior_weight, true});
        std::stable_sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.mu < b.mu; });

        const double min_sigma = range / std::min(100.0, 1.0 + static_cast<double>(obs.size()));
        double wsum = 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const double left = pts[i].mu - (i == 0 ? lo_ : pts[i - 1].mu);
            const double right = (i + 1 == pts.size() ? hi_ : pts[i + 1].mu) - pts[i].mu;
            const double sigma = pts[i].prior ? range : std::clamp(std::max(left, right), min_sigma, range);
            mus_.push_back(pts[i].mu);
            sigmas_.push_back(sigma);
            weights_.push_back(pts[i].weight);
            wsum += pts[i].weight;
        }
        for (double& w : weights_) w /= wsum;
        for (std::size_t i = 0; i < mus_.size(); ++i) {
            const double mass = stats::normal_cdf((hi_ - mus_[i]) / sigmas_[i]) -
                                stats::normal_cdf((lo_ - mus_[i]) / sigmas_[i]);
            norm_.push_back(std::max(mass, 1e-300));
        }
    }

    double sample(Rng& rng) const {
        double u = rng.uniform();
        std::size_t k = 0;
        for (; k + 1 < weights_.size(); ++k) {
            if (u < weights_[k]) break;
            u -= weights_[k];
        }
        const double a = stats::normal_cdf((lo_ - mus_[k]) / sigmas_[k]);
        const double b = stats::normal_cdf((hi_ - mus_[k]) / sigmas_[k]);
        double p = a + (b - a) * rng.uniform();
        p = std::clamp(p, 1e-15, 1.0 - 1e-15);
        double x = mus_[k] + sigmas_[k] * stats::normal_quantile(p);
        x = std::clamp(x, lo_, hi_);
        if (integer_) x = std::clamp(std::round(x), lo_ + 0.5, hi_ - 0.5);
        return x;
    }

    double log_density(double x) const {
        double total = 0.0;
        for (std::size_t i = 0; i < mus_.size(); ++i) {
            double p;
            if (integer_) {
                p = stats::normal_cdf((x + 0.5 - mus_[i]) / sigmas_[i]) -
                    stats::normal_cdf((x - 0.5 - mus_[i]) / sigmas_[i]);
            } else {
                const double z = (x - mus_[i]) / sigmas_[i];
                p = std::exp(-0.5 * z * z) / (sigmas_[i] * std::sqrt(2.0 * std::numbers::pi));
            }
            total += weights_[i] * p / norm_[i];
        }
        return std::log(std::max(total, 1e-300));
    }

private:
    bool integer_;
    double lo_;
    double hi_;
    std::vector<double> mus_;
    std::vector<double> sigmas_;
    std::vector<double> weights_;
    std::vector<double> norm_;
};

std::vector<double> tpe_point(const StudyHistory& history, const SearchSpace& space, Rng& rng,
                              const TpeSettings& tpe) {
    std::vector<const Trial*> ranked;
    for (const Trial& t : history.trials) ranked.push_back(&t);
    std::stable_sort(ranked.begin(), ranked.end(), [](const Trial* a, const Trial* b) {
        if (a->score != b->score) return a->score > b->score;
        return a->id < b->id;
    });
    const auto n_good = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(tpe.gamma * static_cast<double>(ranked.size()))));

    std::vector<ParzenEstimator> good;
    std::vector<ParzenEstimator> bad;
    for (std::size_t d = 0; d < space.size(); ++d) {
        std::vector<double> g, b;
        for (std::size_t i = 0; i < ranked.size(); ++i) (i < n_good ? g : b).push_back(ranked[i]->x[d]);
        good.emplace_back(g, space.dims[d], tpe.prior_weight);
        bad.emplace_back(b, space.dims[d], tpe.prior_weight);
    }

    std::vector<double> best;
    double best_score = -std::numeric_limits<double>::infinity();
    std::size_t drawn = 0;
    for (int attempt = 0; drawn < tpe.n_ei_candidates && attempt < kMaxRedraws; ++attempt) {
        std::vector<double> x(space.size());
        for (std::size_t d = 0; d < space.size(); ++d) x[d] = good[d].sample(rng);
        if (space.feasible && !space.feasible(x)) continue;
        ++drawn;
        double score = 0.0;
        for (std::size_t d = 0; d < space.size(); ++d) score += good[d].log_density(x[d]) - bad[d].log_density(x[d]);
        if (score > best_score) {
            best_score = score;
            best = std::move(x);
        }
    }
    if (best.empty()) return uniform_point(space, rng);
    return best;
}

}  // namespace

std::vector<double> suggest(const StudyHistory& history, const SearchSpace& space, Sampler sampler,
                            std::uint64_t seed, const TpeSettings& tpe) {
    if (space.dims.empty()) fail(ErrorKind::InvalidArgument, "empty search space");
    for (const auto& d : space.dims) {
        if (!(d.lo <= d.hi)) fail(ErrorKind::InvalidArgument, "dimension '" + d.name + "' has lo > hi");
    }
    if (!(tpe.gamma > 0.0 && tpe.gamma <= 1.0)) fail(ErrorKind::InvalidArgument, "tpe gamma must be in (0, 1]");
    const std::uint64_t index = history.trials.size();
    Rng rng(derive_seed(seed, sampler == Sampler::Tpe ? "tuner.tpe" : "tuner.random", index));
    if (sampler == Sampler::Random || history.trials.size() < std::max<std::size_t>(tpe.n_startup, 1)) {
        return uniform_point(space, rng);
    }
    return tpe_point(history, space, rng, tpe);
}

StudyHistory run_study(const Objective& objective, const SearchSpace& space, std::size_t budget, Sampler sampler,
                       std::uint64_t seed, const TpeSettings& tpe) {
    if (budget == 0) fail(ErrorKind::InvalidArgument, "study budget must be >= 1");
    StudyHistory history;
    history.seed = seed;
    history.sampler = sampler;
    history.space_digest = space.digest();
    for (std::size_t i = 0; i < budget; ++i) {
        Trial trial;
        trial.id = i + 1;
        trial.x = suggest(history, space, sampler, seed, tpe);
        try {
            trial.score = objective(trial.x);
        } catch (const std::exception&) {
            trial.score = kSentinelScore;
        }
        if (!std::isfinite(trial.score)) trial.score = kSentinelScore;
        history.trials.push_back(std::move(trial));
    }
    return history;
}

std::vector<BestSoFarRow> best_so_far(const StudyHistory& history) {
    static constexpr std::size_t kCheckpoints[] = {10, 20, 40, 60, 80, 100, 120};
    std::vector<BestSoFarRow> rows;
    const std::size_t n = history.trials.size();
    if (n == 0) return rows;
    std::vector<std::size_t> marks;
    for (std::size_t c : kCheckpoints) {
        if (c <= n) marks.push_back(c);
    }
    if (marks.empty() || marks.back() != n) marks.push_back(n);

    // Sentinel trials rank below every evaluated trial, whatever its score.
    BestSoFarRow best;
    bool best_is_sentinel = true;
    std::size_t m = 0;
    for (std::size_t i = 0; i < n && m < marks.size(); ++i) {
        const Trial& t = history.trials[i];
        const bool sentinel = t.score == kSentinelScore;
        if (best.best_trial_id == 0 || (best_is_sentinel && !sentinel) ||
            (sentinel == best_is_sentinel && t.score > best.best_score)) {
            best_is_sentinel = sentinel;
            best.best_score = t.score;
            best.best_trial_id = t.id;
        }
        if (i + 1 == marks[m]) {
            best.budget = marks[m];
            rows.push_back(best);
            ++m;
        }
    }
    return rows;
}

std::vector<std::size_t> top_k(const StudyHistory& history, std::size_t k) {
    std::vector<const Trial*> ranked;
    for (const Trial& t : history.trials) ranked.push_back(&t);
    std::stable_sort(ranked.begin(), ranked.end(), [](const Trial* a, const Trial* b) {
        if (a->score != b->score) return a->score > b->score;
        return a->id < b->id;
    });
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) ids.push_back(ranked[i]->id);
    return ids;
}

namespace {
constexpr std::size_t kFast = 0, kSlow = 1;
}

SearchSpace strategy_space() {
    SearchSpace s;
    auto add = [&](const char* name, ParamBounds b, bool integer) { s.dims.push_back({name, b.lo, b.hi, integer}); };
    add("ema_fast", bounds::ema_fast, true);
    add("ema_slow", bounds::ema_slow, true);
    add("ema_threshold", bounds::ema_threshold, false);
    add("theta_momentum", bounds::theta_momentum, false);
    add("w_mom", bounds::w_mom, false);
    add("bb_period", bounds::bb_period, true);
    add("bb_dev", bounds::bb_dev, false);
    add("min_hold_bars", bounds::min_hold_bars, true);
    add("cooldown_hours", bounds::cooldown_hours, true);
    add("atr_period", bounds::atr_period, true);
    add("atr_k_sl", bounds::atr_k_sl, false);
    add("atr_k_tp", bounds::atr_k_tp, false);
    add("max_exposure_abs", bounds::max_exposure_abs, false);
    add("funding_bias_thr_bps", bounds::funding_bias_thr_bps, false);
    add("funding_bias_k_thr_per_bps", bounds::funding_bias_k_thr_per_bps, false);
    s.feasible = [](std::span<const double> x) { return x[kFast] < x[kSlow]; };
    return s;
}

StrategyParams params_from_vector(std::span<const double> x) {
    if (x.size() != 15) fail(ErrorKind::InvalidArgument, "strategy vector must have 15 entries");
    auto i = [&](std::size_t k) { return static_cast<int>(std::lround(x[k])); };
    StrategyParams p;
    p.ema_fast = i(0);
    p.ema_slow = i(1);
    p.ema_threshold = x[2];
    p.theta_momentum = x[3];
    p.w_mom = x[4];
    p.bb_period = i(5);
    p.bb_dev = x[6];
    p.min_hold_bars = i(7);
    p.cooldown_hours = i(8);
    p.atr_period = i(9);
    p.atr_k_sl = x[10];
    p.atr_k_tp = x[11];
    p.max_exposure_abs = x[12];
    p.funding_bias_thr_bps = x[13];
    p.funding_bias_k_thr_per_bps = x[14];
    p.funding_gates_enabled = true;
    return p;
}

std::vector<double> params_to_vector(const StrategyParams& p) {
    return {static_cast<double>(p.ema_fast), static_cast<double>(p.ema_slow), p.ema_threshold, p.theta_momentum,
            p.w_mom, static_cast<double>(p.bb_period), p.bb_dev, static_cast<double>(p.min_hold_bars),
            static_cast<double>(p.cooldown_hours), static_cast<double>(p.atr_period), p.atr_k_sl, p.atr_k_tp,
            p.max_exposure_abs, p.funding_bias_thr_bps, p.funding_bias_k_thr_per_bps};
}

Objective backtest_objective(const BarSeries& series, const FundingSeries& funding, const CostProfile& profile,
                             const WindowSpec& window) {
    return [&series, &funding, profile, window](std::span<const double> x) {
        const StrategyParams p = params_from_vector(x);
        return metrics(run_backtest(series, funding, p, profile, window, Semantics::StrictT1), 0.0).ann_return;
    };
}

namespace {

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string unquote(std::string_view s, const std::string& where) {
    if (s.size() < 2 || s.front() != '"' || s.back() != '"') fail(ErrorKind::Schema, where + ": params_json must be quoted");
    std::string out;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
        out += s[i];
        if (s[i] == '"') {
            if (i + 2 >= s.size() || s[i + 1] != '"') fail(ErrorKind::Schema, where + ": stray quote in params_json");
            ++i;
        }
    }
    return out;
}

}  // namespace

void write_study_csv(const StudyHistory& history, const std::string& path, const std::string& run_id) {
    auto out = csv::open_for_write(path, kStudyHeader, run_id);
    for (const Trial& t : history.trials) {
        out << t.id << ',' << csv::format_double(t.score) << ','
            << quote(canonical_dump(to_json(params_from_vector(t.x)))) << '\n';
    }
    if (!out) fail(ErrorKind::Io, "failed writing " + path);
}

std::vector<StudyRow> read_study_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open " + path);
    std::vector<StudyRow> rows;
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        const std::string where = path + ":" + std::to_string(line_no);
        if (!header) {
            if (line != kStudyHeader) fail(ErrorKind::Schema, where + ": expected header '" + std::string(kStudyHeader) + "'");
            header = true;
            continue;
        }
        const auto c1 = line.find(',');
        const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
        if (c2 == std::string::npos) fail(ErrorKind::Schema, where + ": expected 3 study fields");
        StudyRow r;
        r.trial_id = static_cast<std::size_t>(csv::parse_int(std::string_view(line).substr(0, c1)));
        r.score = csv::parse_double(std::string_view(line).substr(c1 + 1, c2 - c1 - 1));
        try {
            r.params = params_from_json(Json::parse(unquote(std::string_view(line).substr(c2 + 1), where)));
        } catch (const Json::exception& e) {
            fail(ErrorKind::Schema, where + ": " + e.what());
        }
        rows.push_back(r);
    }
    if (!header) fail(ErrorKind::Schema, path + ": missing header");
    return rows;
}

void write_best_so_far_csv(std::span<const BestSoFarRow> rows, const std::string& path, const std::string& run_id) {
    auto out = csv::open_for_write(path, kBestSoFarHeader, run_id);
    for (const auto& r : rows) out << r.budget << ',' << csv::format_double(r.best_score) << ',' << r.best_trial_id << '\n';
    if (!out) fail(ErrorKind::Io, "failed writing " + path);
}

}  // namespace perpsieve
