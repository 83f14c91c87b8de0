#pragma once
// Stochastic model-space search: shotgun stochastic search (SSS) and its
// simplified, screened and tempered variant (S5), with a score cache that
// doubles as the ledger of every model scored.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "nlsel/core.hpp"
#include "nlsel/marginal.hpp"

namespace nlsel {

// ---------------------------------------------------------------------------
// Random numbers

/// 64-bit SplitMix step; used to derive independent seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t deriveSeed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(master ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

using Rng = std::mt19937_64;

/// Uniform draw on [0, 1) from the top 53 bits.
inline double uniform01(Rng &rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// ---------------------------------------------------------------------------
// Tempered categorical sampling

/// Index i drawn with probability proportional to exp(logScores[i] / t).
/// Entries at -inf are never chosen.  Consumes exactly one uniform.
inline std::size_t sampleTempered(std::span<const double> logScores, double t, Rng &rng) {
    if (!(t > 0)) throw DomainError("temperature must be positive");
    double best = kNegInf;
    for (double v : logScores)
        if (v > best) best = v;
    if (best == kNegInf) throw AllNegInfinity();
    std::vector<double> w(logScores.size());
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = logScores[i] == kNegInf ? 0.0 : std::exp((logScores[i] - best) / t);
        total += w[i];
    }
    const double u = uniform01(rng) * total;
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] == 0.0) continue;
        last = i;
        acc += w[i];
        if (u < acc) return i;
    }
    return last;
}

inline double logSumExp(std::span<const double> v) {
    double best = kNegInf;
    for (double x : v) best = std::max(best, x);
    if (best == kNegInf) return kNegInf;
    double acc = 0.0;
    for (double x : v) acc += std::exp(x - best);
    return best + std::log(acc);
}

// ---------------------------------------------------------------------------
// Ledger

/// Every model scored during a search, with its score, the number of models
/// scored before it, and the elapsed time at which it was first scored.
class Ledger {
  public:
    struct Entry {
        double score = kNegInf;
        std::size_t firstHit = 0; ///< models scored before this one
        double seconds = 0.0;     ///< search time elapsed when first scored
    };

    std::optional<double> find(const Model &k) const {
        auto it = entries_.find(k);
        if (it == entries_.end()) return std::nullopt;
        return it->second.score;
    }
    bool contains(const Model &k) const { return entries_.contains(k); }
    const Entry &entry(const Model &k) const { return entries_.at(k); }
    double score(const Model &k) const { return entries_.at(k).score; }
    std::size_t firstHitIndex(const Model &k) const { return entries_.at(k).firstHit; }

    /// Insert-if-absent; an existing entry is never overwritten.
    bool record(const Model &k, double score, double seconds = 0.0) {
        auto [it, inserted] = entries_.try_emplace(k, Entry{score, entries_.size(), seconds});
        return inserted;
    }

    void visit(int iteration, const Model &k) { visits_.emplace_back(iteration, k); }

    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    const auto &entries() const noexcept { return entries_; }
    const std::vector<std::pair<int, Model>> &visitOrder() const noexcept { return visits_; }

    /// Models in first-scored order.
    std::vector<std::pair<Model, Entry>> inScoringOrder() const {
        std::vector<std::pair<Model, Entry>> out(entries_.begin(), entries_.end());
        std::sort(out.begin(), out.end(), [](const auto &a, const auto &b) { return a.second.firstHit < b.second.firstHit; });
        return out;
    }

    // run diagnostics
    int transitions = 0;
    int deadEnds = 0;
    std::size_t scoringCalls = 0;
    std::vector<std::string> warnings;
    double wallSeconds = 0.0;

  private:
    std::unordered_map<Model, Entry, ModelHash> entries_;
    std::vector<std::pair<int, Model>> visits_;
};

// ---------------------------------------------------------------------------
// Configuration

struct SssParams {
    int N = 400;
    bool includeSwaps = true; ///< false drops the swap neighbourhood
};

enum class ScreenResidual { OLS, Ridge };

struct S5Params {
    int J = 20;
    int L = 20;
    int Mn = 20;
    std::vector<double> schedule; ///< empty: geometric from 3 down to 1 over L levels
    ScreenResidual residual = ScreenResidual::OLS;
};

struct SearchConfig {
    std::variant<SssParams, S5Params> algorithm = S5Params{};
    int qn = 40;
    std::uint64_t seed = 1;
    int threads = 1;
};

/// Geometric temperatures from hi to lo (inclusive) over L levels.
inline std::vector<double> geometricSchedule(int L, double hi = 3.0, double lo = 1.0) {
    std::vector<double> t(L);
    if (L == 1) {
        t[0] = lo;
        return t;
    }
    for (int l = 0; l < L; ++l) t[l] = hi * std::pow(lo / hi, static_cast<double>(l) / (L - 1));
    return t;
}

inline std::vector<double> resolveSchedule(const S5Params &p) {
    std::vector<double> t = p.schedule.empty() ? geometricSchedule(p.L) : p.schedule;
    if (static_cast<int>(t.size()) != p.L) throw DomainError("temperature schedule must have L entries");
    for (std::size_t l = 0; l < t.size(); ++l) {
        if (!(t[l] > 0)) throw DomainError("temperatures must be positive");
        if (l > 0 && !(t[l] < t[l - 1])) throw DomainError("temperature schedule must be strictly decreasing");
    }
    return t;
}

inline void validate(const SearchConfig &cfg) {
    if (cfg.qn < 0) throw DomainError("qn must be non-negative");
    if (auto s = std::get_if<SssParams>(&cfg.algorithm)) {
        if (s->N < 1) throw DomainError("SSS needs N >= 1");
    } else {
        const auto &p = std::get<S5Params>(cfg.algorithm);
        if (p.J < 1 || p.L < 1 || p.Mn < 1) throw DomainError("S5 needs J, L, Mn >= 1");
        resolveSchedule(p);
    }
}

// ---------------------------------------------------------------------------
// Screening

struct ScreenSet {
    std::vector<int> indices; ///< ascending
};

/// k together with the Mn columns outside k with the largest |corr_j|;
/// ties go to the lower column index.
inline ScreenSet screenFromCorrelation(const VectorXd &corr, const Model &k, int Mn) {
    const int p = static_cast<int>(corr.size());
    std::vector<int> cand;
    cand.reserve(p);
    for (int j = 0; j < p; ++j)
        if (!k.contains(j)) cand.push_back(j);
    const std::size_t take = std::min<std::size_t>(std::max(Mn, 0), cand.size());
    auto better = [&](int a, int b) {
        const double ca = std::abs(corr[a]), cb = std::abs(corr[b]);
        return ca > cb || (ca == cb && a < b);
    };
    std::partial_sort(cand.begin(), cand.begin() + take, cand.end(), better);
    ScreenSet out;
    out.indices.assign(k.begin(), k.end());
    out.indices.insert(out.indices.end(), cand.begin(), cand.begin() + take);
    std::sort(out.indices.begin(), out.indices.end());
    return out;
}

/// k together with the Mn columns outside k with the largest |r^T X_j|.
inline ScreenSet screen(const Dataset &data, const VectorXd &residual, const Model &k, int Mn) {
    return screenFromCorrelation(data.X.transpose() * residual, k, Mn);
}

// ---------------------------------------------------------------------------
// Batch scoring through the ledger

template <class S>
concept ModelScoringFunction = requires(const S &s, const Model &k) {
    { s(k) } -> std::convertible_to<ScoreOutcome>;
};

namespace detail {

inline ScoreOutcome asOutcome(ScoreOutcome o) { return o; }

class Stopwatch {
  public:
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

  private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

/// Scores every candidate, reusing ledger entries.  Models not yet in the
/// ledger are scored (possibly on several threads) and then recorded in
/// candidate order, so the ledger never depends on the thread count.
template <ModelScoringFunction Scorer>
std::vector<double> scoreBatch(const std::vector<Model> &cands, const Scorer &scorer, Ledger &ledger, int threads,
                               const Stopwatch &clock) {
    std::vector<double> out(cands.size(), kNegInf);
    std::vector<std::size_t> missing;
    std::unordered_map<Model, std::size_t, ModelHash> pending;
    for (std::size_t i = 0; i < cands.size(); ++i) {
        if (auto s = ledger.find(cands[i])) out[i] = *s;
        else if (pending.try_emplace(cands[i], missing.size()).second) missing.push_back(i);
    }
    std::vector<ScoreOutcome> fresh(missing.size());
    const int nthreads = std::max(1, std::min<int>(threads, static_cast<int>(missing.size())));
    if (nthreads <= 1) {
        for (std::size_t m = 0; m < missing.size(); ++m) fresh[m] = scorer(cands[missing[m]]);
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(nthreads);
        for (int t = 0; t < nthreads; ++t)
            pool.emplace_back([&, t] {
                for (std::size_t m = t; m < missing.size(); m += nthreads) fresh[m] = scorer(cands[missing[m]]);
            });
    }
    const double now = clock.seconds();
    for (std::size_t m = 0; m < missing.size(); ++m) {
        ledger.record(cands[missing[m]], fresh[m].score, now);
        ++ledger.scoringCalls;
        if (!fresh[m].warning.empty() && ledger.warnings.size() < 100) ledger.warnings.push_back(fresh[m].warning);
    }
    for (std::size_t i = 0; i < cands.size(); ++i)
        if (auto it = pending.find(cands[i]); it != pending.end()) out[i] = fresh[it->second].score;
    return out;
}

/// Draw from one neighbourhood component.  Returns nullopt (consuming no
/// randomness) when the component is empty or entirely -inf.
inline std::optional<std::size_t> drawComponent(const std::vector<double> &scores, double t, Rng &rng) {
    if (std::none_of(scores.begin(), scores.end(), [](double v) { return v > kNegInf; })) return std::nullopt;
    return sampleTempered(scores, t, rng);
}

struct Proposal {
    Model model;
    double score;
};

/// One shotgun move: pick a representative per component, then pick among
/// the representatives, all with weights exp(score / t).
inline std::optional<Model> shotgunMove(const std::vector<std::vector<Model>> &components,
                                        const std::vector<std::vector<double>> &scores, double t, Rng &rng) {
    std::vector<Proposal> reps;
    for (std::size_t c = 0; c < components.size(); ++c)
        if (auto i = drawComponent(scores[c], t, rng)) reps.push_back({components[c][*i], scores[c][*i]});
    if (reps.empty()) return std::nullopt;
    std::vector<double> s;
    for (const auto &r : reps) s.push_back(r.score);
    return reps[sampleTempered(s, t, rng)].model;
}

} // namespace detail

/// Adapter letting plain `double(const Model&)` callables act as scorers.
template <class F> struct PlainScorer {
    F f;
    ScoreOutcome operator()(const Model &k) const { return {f(k), {}}; }
};
template <class F> PlainScorer(F) -> PlainScorer<F>;

// ---------------------------------------------------------------------------
// SSS

/// Shotgun stochastic search.  The neighbourhood of the current model is
/// scored before every move and once more after the last move, so a run of
/// N makes N-1 transitions and N neighbourhood evaluations; the initial
/// model itself is scored first.
template <ModelScoringFunction Scorer>
Ledger runSSS(const Dataset &data, const Scorer &scorer, const SearchConfig &cfg, const Model &init = {}) {
    validate(cfg);
    const auto &params = std::get<SssParams>(cfg.algorithm);
    if (static_cast<int>(init.size()) > cfg.qn) throw DomainError("initial model exceeds qn");
    const int p = data.p();
    Rng rng(cfg.seed);
    Ledger ledger;
    const detail::Stopwatch clock;

    Model current = init;
    ledger.visit(1, current);
    detail::scoreBatch({current}, scorer, ledger, cfg.threads, clock);

    auto scoreNeighborhood = [&](const Model &k, std::vector<std::vector<Model>> &comps,
                                 std::vector<std::vector<double>> &scores) {
        comps.clear();
        comps.push_back(additions(k, p, cfg.qn));
        comps.push_back(removals(k));
        if (params.includeSwaps) comps.push_back(swaps(k, p));
        std::vector<Model> all;
        for (const auto &c : comps) all.insert(all.end(), c.begin(), c.end());
        const std::vector<double> flat = detail::scoreBatch(all, scorer, ledger, cfg.threads, clock);
        scores.clear();
        std::size_t off = 0;
        for (const auto &c : comps) {
            scores.emplace_back(flat.begin() + off, flat.begin() + off + c.size());
            off += c.size();
        }
    };

    std::vector<std::vector<Model>> comps;
    std::vector<std::vector<double>> scores;
    scoreNeighborhood(current, comps, scores);
    for (int i = 1; i < params.N; ++i) {
        if (auto next = detail::shotgunMove(comps, scores, 1.0, rng)) {
            current = *next;
            ++ledger.transitions;
        } else {
            ++ledger.deadEnds;
            if (ledger.warnings.size() < 100) ledger.warnings.push_back("dead end at " + current.str() + ": every neighbour scores -inf");
        }
        ledger.visit(i + 1, current);
        scoreNeighborhood(current, comps, scores);
    }
    ledger.wallSeconds = clock.seconds();
    return ledger;
}

// ---------------------------------------------------------------------------
// S5

namespace detail {

inline VectorXd screeningCoefficients(const Dataset &data, const Model &k, ScreenResidual kind, double tau) {
    try {
        if (kind == ScreenResidual::Ridge) return ridgeFit(data, k, tau).beta;
        return olsFit(data, k).beta;
    } catch (const SingularGram &) {
        return ridgeFit(data, k, tau).beta;
    }
}

inline VectorXd screeningResidual(const Dataset &data, const Model &k, ScreenResidual kind, double tau) {
    if (k.empty()) return data.y;
    return data.y - columns(data, k) * screeningCoefficients(data, k, kind, tau);
}

/// Screening without a pass over X per step: X^T r = X^T y - sum_j b_j X^T x_j
/// with X^T x_j cached for every column that has entered a model.
class Screener {
  public:
    Screener(const Dataset &data, ScreenResidual kind, double tau)
        : data_(&data), kind_(kind), tau_(tau), xty_(data.X.transpose() * data.y) {}

    const ScreenSet &operator()(const Model &k, int Mn) {
        if (valid_ && k == last_) return set_;
        VectorXd corr = xty_;
        if (!k.empty()) {
            const VectorXd b = screeningCoefficients(*data_, k, kind_, tau_);
            for (std::size_t i = 0; i < k.size(); ++i) corr.noalias() -= b[static_cast<Eigen::Index>(i)] * cross(k.vec()[i]);
        }
        set_ = screenFromCorrelation(corr, k, Mn);
        last_ = k;
        valid_ = true;
        return set_;
    }

  private:
    const VectorXd &cross(int j) {
        auto it = cross_.find(j);
        if (it == cross_.end()) it = cross_.emplace(j, data_->X.transpose() * data_->X.col(j)).first;
        return it->second;
    }

    const Dataset *data_;
    ScreenResidual kind_;
    double tau_;
    VectorXd xty_;
    std::unordered_map<int, VectorXd> cross_;
    Model last_;
    ScreenSet set_;
    bool valid_ = false;
};

} // namespace detail

/// Simplified shotgun stochastic search with screening.  For each
/// temperature t_l, J-1 moves over {screened additions, removals} with
/// weights exp(score / t_l); after each move the screen set is rebuilt from
/// the residual of the new model.  `ridgeTau` is only used for ridge
/// residuals (and as a fallback for singular OLS fits).
template <ModelScoringFunction Scorer>
Ledger runS5(const Dataset &data, const Scorer &scorer, const SearchConfig &cfg, const Model &init = {},
             double ridgeTau = 1.0) {
    validate(cfg);
    const auto &params = std::get<S5Params>(cfg.algorithm);
    const std::vector<double> temps = resolveSchedule(params);
    if (static_cast<int>(init.size()) > cfg.qn) throw DomainError("initial model exceeds qn");
    Rng rng(cfg.seed);
    Ledger ledger;
    const detail::Stopwatch clock;

    Model current = init;
    ledger.visit(1, current);
    detail::scoreBatch({current}, scorer, ledger, cfg.threads, clock);
    detail::Screener screener(data, params.residual, ridgeTau);
    ScreenSet S = screener(current, params.Mn);

    std::vector<std::vector<Model>> comps(2);
    std::vector<std::vector<double>> scores(2);
    auto scoreNeighborhood = [&](const Model &k) {
        comps[0] = additionsFrom(k, cfg.qn, S.indices);
        comps[1] = removals(k);
        std::vector<Model> all = comps[0];
        all.insert(all.end(), comps[1].begin(), comps[1].end());
        const std::vector<double> flat = detail::scoreBatch(all, scorer, ledger, cfg.threads, clock);
        scores[0].assign(flat.begin(), flat.begin() + comps[0].size());
        scores[1].assign(flat.begin() + comps[0].size(), flat.end());
    };

    scoreNeighborhood(current);
    int iteration = 1;
    for (double t : temps) {
        for (int i = 1; i < params.J; ++i) {
            if (auto next = detail::shotgunMove(comps, scores, t, rng)) {
                current = *next;
                ++ledger.transitions;
            } else {
                ++ledger.deadEnds;
                if (ledger.warnings.size() < 100) ledger.warnings.push_back("dead end at " + current.str() + ": every neighbour scores -inf");
            }
            ledger.visit(++iteration, current);
            S = screener(current, params.Mn);
            scoreNeighborhood(current);
        }
    }
    ledger.wallSeconds = clock.seconds();
    return ledger;
}

/// Dispatch on the configured algorithm.
template <ModelScoringFunction Scorer>
Ledger runSearch(const Dataset &data, const Scorer &scorer, const SearchConfig &cfg, const Model &init = {},
                 double ridgeTau = 1.0) {
    if (std::holds_alternative<SssParams>(cfg.algorithm)) return runSSS(data, scorer, cfg, init);
    return runS5(data, scorer, cfg, init, ridgeTau);
}

// ---------------------------------------------------------------------------
// Posterior summaries

struct PosteriorSummary {
    Model map;
    double mapScore = kNegInf;
    double logNormalizer = kNegInf;
    std::map<Model, double> probs; ///< ledger-normalised posterior probabilities
    int oddsCount = 0;             ///< models with posterior odds vs MAP above the floor

    double prob(const Model &k) const {
        auto it = probs.find(k);
        return it == probs.end() ? 0.0 : it->second;
    }

    /// Models sorted by decreasing probability (ties by model order).
    std::vector<std::pair<Model, double>> top(std::size_t count) const {
        std::vector<std::pair<Model, double>> v(probs.begin(), probs.end());
        std::stable_sort(v.begin(), v.end(), [](const auto &a, const auto &b) { return a.second > b.second; });
        if (v.size() > count) v.resize(count);
        return v;
    }
};

/// MAP model (ties to the lexicographically smallest), probabilities
/// normalised over the ledger, and the count of models whose odds against
/// the MAP exceed `oddsFloor`.  Throws EmptyLedger.
inline PosteriorSummary posteriorSummary(const Ledger &ledger, double oddsFloor = 1e-3) {
    PosteriorSummary out;
    std::vector<double> all;
    all.reserve(ledger.size());
    bool found = false;
    for (const auto &[m, e] : ledger.entries()) {
        all.push_back(e.score);
        if (e.score == kNegInf) continue;
        if (!found || e.score > out.mapScore || (e.score == out.mapScore && m < out.map)) {
            out.map = m;
            out.mapScore = e.score;
            found = true;
        }
    }
    if (!found) throw EmptyLedger();
    out.logNormalizer = logSumExp(all);
    for (const auto &[m, e] : ledger.entries()) {
        out.probs[m] = std::exp(e.score - out.logNormalizer);
        if (std::exp(e.score - out.mapScore) > oddsFloor) ++out.oddsCount;
    }
    return out;
}

/// Every model of size <= qn over p columns, in order of size then lexicographic.
inline std::vector<Model> enumerateModels(int p, int qn) {
    std::vector<Model> out;
    std::vector<int> comb;
    for (int d = 0; d <= std::min(qn, p); ++d) {
        comb.resize(d);
        std::iota(comb.begin(), comb.end(), 0);
        while (true) {
            out.emplace_back(comb);
            int i = d - 1;
            while (i >= 0 && comb[i] == p - d + i) --i;
            if (i < 0) break;
            ++comb[i];
            for (int j = i + 1; j < d; ++j) comb[j] = comb[j - 1] + 1;
        }
    }
    return out;
}

/// Score every model of size <= qn into a fresh ledger.
template <ModelScoringFunction Scorer> Ledger enumerateAll(int p, int qn, const Scorer &scorer, int threads = 1) {
    Ledger ledger;
    const detail::Stopwatch clock;
    detail::scoreBatch(enumerateModels(p, qn), scorer, ledger, threads, clock);
    return ledger;
}

} // namespace nlsel
