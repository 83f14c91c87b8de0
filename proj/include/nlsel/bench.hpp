#pragma once
// Synthetic benchmark harness: the three covariance designs, selection
// metrics, precision-recall curves over hyperparameter grids, MSPE
// cross-validation, search comparisons, and posterior-concentration sweeps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "nlsel/core.hpp"
#include "nlsel/marginal.hpp"
#include "nlsel/search.hpp"

namespace nlsel {

enum class CovarianceCase { CompoundSymmetry = 1, AR1 = 2, Isotropic = 3 };

struct SimDesign {
    CovarianceCase kase = CovarianceCase::Isotropic;
    int n = 400;
    int p = 1000;
    Model trueModel{0, 1, 2, 3, 4};
    std::vector<double> trueMagnitudes{0.50, 0.75, 1.00, 1.25, 1.50};
    double sigma = 1.5;
    std::uint64_t seed = 1;
};

/// Rows i.i.d. N(0, Sigma):
///  compound symmetry  sqrt(.5) z0 + sqrt(.5) z_j       (Sigma_jj' = 0.5)
///  AR(1)              x_j = .5 x_{j-1} + sqrt(.75) e_j  (Sigma_jj' = .5^|j-j'|)
///  isotropic          Sigma = I
inline MatrixXd genDesignMatrix(const SimDesign &d, Rng &rng) {
    if (d.n < 1 || d.p < 1) throw DomainError("design needs n, p >= 1");
    std::normal_distribution<double> z;
    MatrixXd X(d.n, d.p);
    const double half = std::sqrt(0.5), ar = std::sqrt(0.75);
    for (int i = 0; i < d.n; ++i) {
        switch (d.kase) {
        case CovarianceCase::CompoundSymmetry: {
            const double z0 = z(rng);
            for (int j = 0; j < d.p; ++j) X(i, j) = half * z0 + half * z(rng);
            break;
        }
        case CovarianceCase::AR1: {
            X(i, 0) = z(rng);
            for (int j = 1; j < d.p; ++j) X(i, j) = 0.5 * X(i, j - 1) + ar * z(rng);
            break;
        }
        case CovarianceCase::Isotropic:
            for (int j = 0; j < d.p; ++j) X(i, j) = z(rng);
            break;
        }
    }
    return X;
}

struct Response {
    VectorXd y;
    VectorXd signedBeta;
};

/// Random +/- sign per true coefficient, then y = X_t beta + N(0, sigma^2 I).
inline Response genResponse(const MatrixXd &X, const SimDesign &d, Rng &rng) {
    if (d.trueMagnitudes.size() != d.trueModel.size()) throw DomainError("true magnitudes must match the true model");
    if (!(d.sigma >= 0)) throw DomainError("sigma must be non-negative");
    if (!d.trueModel.empty() && d.trueModel.vec().back() >= X.cols()) throw DomainError("true model exceeds design width");
    Response r;
    r.signedBeta.resize(d.trueModel.size());
    for (std::size_t j = 0; j < d.trueModel.size(); ++j)
        r.signedBeta[j] = (uniform01(rng) < 0.5 ? -1.0 : 1.0) * d.trueMagnitudes[j];
    r.y = X(Eigen::all, d.trueModel.vec()) * r.signedBeta;
    std::normal_distribution<double> z;
    for (Eigen::Index i = 0; i < r.y.size(); ++i) r.y[i] += d.sigma * z(rng);
    return r;
}

/// FNV-1a over the raw bytes of X then y.
inline std::uint64_t checksum(const MatrixXd &X, const VectorXd &y) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](const double *p, Eigen::Index count) {
        const auto *bytes = reinterpret_cast<const unsigned char *>(p);
        for (Eigen::Index i = 0; i < count * static_cast<Eigen::Index>(sizeof(double)); ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ULL;
        }
    };
    mix(X.data(), X.size());
    mix(y.data(), y.size());
    return h;
}

struct Simulated {
    Dataset raw;
    Dataset data; ///< standardized
    VectorXd signedBeta;
    std::uint64_t checksum = 0;
};

/// Draw (X, y) from the design's own seed and standardize.
inline Simulated simulate(const SimDesign &d) {
    Rng rng(d.seed);
    Simulated s;
    MatrixXd X = genDesignMatrix(d, rng);
    Response r = genResponse(X, d, rng);
    s.checksum = checksum(X, r.y);
    s.signedBeta = std::move(r.signedBeta);
    s.raw = Dataset(std::move(r.y), std::move(X));
    s.data = standardize(s.raw);
    return s;
}

inline SimDesign replicateDesign(SimDesign d, int replicate) {
    d.seed = deriveSeed(d.seed, static_cast<std::uint64_t>(replicate));
    return d;
}

// ---------------------------------------------------------------------------
// Selection metrics

struct SelectionMetrics {
    int tp = 0, fp = 0, fn = 0;
    double precision = 1.0; ///< 1 when nothing is selected
    double recall = 0.0;
};

inline SelectionMetrics selectionMetrics(const Model &selected, const Model &truth) {
    SelectionMetrics m;
    for (int j : selected) (truth.contains(j) ? m.tp : m.fp)++;
    m.fn = static_cast<int>(truth.size()) - m.tp;
    m.precision = m.tp + m.fp == 0 ? 1.0 : static_cast<double>(m.tp) / (m.tp + m.fp);
    m.recall = m.tp + m.fn == 0 ? 1.0 : static_cast<double>(m.tp) / (m.tp + m.fn);
    return m;
}

// ---------------------------------------------------------------------------
// Selection through a search

/// Scorer configuration with the model prior bound to the data and search.
inline ScorerConfig bindScorer(ScorerConfig cfg, const Dataset &data, const SearchConfig &search) {
    cfg.modelPrior.qn = search.qn;
    cfg.modelPrior.p = data.p();
    return cfg;
}

inline ScorerConfig withHyper(ScorerConfig cfg, double h) {
    if (cfg.coefPrior.family == PriorFamily::GPrior) cfg.coefPrior.g = h;
    else cfg.coefPrior.tau = h;
    return cfg;
}

inline Ledger searchLedger(const Dataset &data, const ScorerConfig &scorerCfg, const SearchConfig &search) {
    const ScorerConfig cfg = bindScorer(scorerCfg, data, search);
    const ModelScorer scorer(data, cfg);
    return runSearch(data, scorer, search, Model{}, resolveTau(cfg.coefPrior, data.n(), data.p()));
}

/// MAP model of a search run.
struct SearchSelector {
    Model operator()(const Dataset &data, const ScorerConfig &scorerCfg, const SearchConfig &search) const {
        return posteriorSummary(searchLedger(data, scorerCfg, search)).map;
    }
};

// ---------------------------------------------------------------------------
// Precision-recall curves

struct PRPoint {
    double hyper = 0;
    double precision = 0;
    double recall = 0;
};

struct PRCurve {
    std::vector<PRPoint> points; ///< one per grid value, in grid order
    double area = std::numeric_limits<double>::quiet_NaN();
    bool degenerate = false; ///< fewer than two points: no curve
    int replicates = 0;
    int failedReplicates = 0;
};

/// Area under a PR curve: points sorted by recall, extended flat to recall
/// 0, integrated by the trapezoid rule.  NaN for fewer than two points.
inline double prArea(std::vector<PRPoint> pts) {
    if (pts.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    std::sort(pts.begin(), pts.end(), [](const PRPoint &a, const PRPoint &b) {
        return a.recall < b.recall || (a.recall == b.recall && a.precision > b.precision);
    });
    double area = pts.front().recall * pts.front().precision;
    for (std::size_t i = 1; i < pts.size(); ++i)
        area += (pts[i].recall - pts[i - 1].recall) * 0.5 * (pts[i].precision + pts[i - 1].precision);
    return area;
}

/// Average precision and recall per grid value over replicates (the same
/// data sets for every grid value).
template <class Selector = SearchSelector>
PRCurve prCurve(const SimDesign &design, const ScorerConfig &scorerTemplate, const std::vector<double> &grid,
                int replicates, const SearchConfig &search, const Selector &select = {}) {
    if (grid.empty()) throw DomainError("hyperparameter grid is empty");
    PRCurve curve;
    curve.replicates = replicates;
    std::vector<double> prec(grid.size(), 0.0), rec(grid.size(), 0.0);
    int ok = 0;
    for (int r = 0; r < replicates; ++r) {
        try {
            const Simulated sim = simulate(replicateDesign(design, r));
            SearchConfig sc = search;
            sc.seed = deriveSeed(search.seed, static_cast<std::uint64_t>(r));
            std::vector<SelectionMetrics> ms;
            for (double h : grid) ms.push_back(selectionMetrics(select(sim.data, withHyper(scorerTemplate, h), sc), design.trueModel));
            for (std::size_t g = 0; g < grid.size(); ++g) {
                prec[g] += ms[g].precision;
                rec[g] += ms[g].recall;
            }
            ++ok;
        } catch (const Error &) {
            ++curve.failedReplicates;
        }
    }
    for (std::size_t g = 0; g < grid.size(); ++g)
        curve.points.push_back({grid[g], ok ? prec[g] / ok : 0.0, ok ? rec[g] / ok : 0.0});
    curve.degenerate = curve.points.size() < 2;
    curve.area = prArea(curve.points);
    return curve;
}

// ---------------------------------------------------------------------------
// Out-of-sample prediction error

struct MspeResult {
    double meanMSPE = 0;
    double sd = 0;
    bool degenerate = false; ///< single replicate: sd undefined, reported as 0
    double avgModelSize = 0;
    std::vector<int> frequentlySelected; ///< selected in >= 95% of replicates
    std::vector<int> everSelected;
    std::vector<double> perReplicate;
};

/// Random train/test splits; search on the training rows, least-squares
/// refit of the MAP model on the training rows, squared error on the test
/// rows.  `select` maps (train data, scorer, search) to a model.
template <class Selector = SearchSelector>
MspeResult mspeEvaluate(const Dataset &data, const ScorerConfig &scorerCfg, const SearchConfig &search,
                        double testFraction, int replicates, Rng &rng, const Selector &select = {}) {
    if (!(testFraction > 0 && testFraction <= 0.5)) throw DomainError("test fraction must lie in (0, 0.5]");
    if (replicates < 1) throw DomainError("need at least one replicate");
    const int n = data.n(), p = data.p();
    const int nTest = std::max(1, static_cast<int>(std::lround(testFraction * n)));
    const int nTrain = n - nTest;
    if (nTrain < 3) throw DomainError("training split too small");
    MspeResult res;
    std::vector<int> counts(p, 0);
    std::vector<int> rows(n);
    double sizeSum = 0;
    for (int r = 0; r < replicates; ++r) {
        std::iota(rows.begin(), rows.end(), 0);
        std::shuffle(rows.begin(), rows.end(), rng);
        const std::vector<int> trainRows(rows.begin(), rows.begin() + nTrain);
        const std::vector<int> testRows(rows.begin() + nTrain, rows.end());

        Dataset train(data.y(trainRows), data.X(trainRows, Eigen::all));
        const double yMean = train.y.mean();
        const Eigen::RowVectorXd means = train.X.colwise().mean();
        train.y.array() -= yMean;
        train.X.rowwise() -= means;

        SearchConfig sc = search;
        sc.seed = deriveSeed(search.seed, static_cast<std::uint64_t>(r));
        const Model k = select(train, scorerCfg, sc);
        for (int j : k) ++counts[j];
        sizeSum += static_cast<double>(k.size());

        VectorXd pred = VectorXd::Constant(nTest, yMean);
        if (!k.empty()) {
            const Fit fit = olsFit(train, k);
            MatrixXd Xt = data.X(testRows, k.vec());
            Xt.rowwise() -= means(k.vec());
            pred += Xt * fit.beta;
        }
        res.perReplicate.push_back((data.y(testRows) - pred).squaredNorm() / nTest);
    }
    const double R = replicates;
    res.meanMSPE = std::accumulate(res.perReplicate.begin(), res.perReplicate.end(), 0.0) / R;
    if (replicates > 1) {
        double ss = 0;
        for (double v : res.perReplicate) ss += (v - res.meanMSPE) * (v - res.meanMSPE);
        res.sd = std::sqrt(ss / (R - 1));
    } else {
        res.degenerate = true;
    }
    res.avgModelSize = sizeSum / R;
    for (int j = 0; j < p; ++j) {
        if (counts[j] > 0) res.everSelected.push_back(j);
        if (counts[j] >= 0.95 * R) res.frequentlySelected.push_back(j);
    }
    return res;
}

/// Append `extra` independent standard normal columns (noise covariates).
inline Dataset appendNoiseColumns(const Dataset &data, int extra, Rng &rng) {
    std::normal_distribution<double> z;
    MatrixXd X(data.n(), data.p() + extra);
    X.leftCols(data.p()) = data.X;
    for (int j = 0; j < extra; ++j)
        for (int i = 0; i < data.n(); ++i) X(i, data.p() + j) = z(rng);
    return Dataset(data.y, std::move(X));
}

// ---------------------------------------------------------------------------
// S5 versus SSS

struct CompareRow {
    int p = 0;
    std::string algo;
    double meanWallSeconds = 0;      ///< whole search (scoring + moves)
    double meanSecondsToMap = 0;     ///< until the run's MAP was first scored
    double meanModelsBeforeMap = 0;  ///< distinct models scored before the MAP
    double meanDistinctModels = 0;
    double mapAgreement = 0;         ///< fraction of replicates where S5 and SSS MAPs coincide
    int replicates = 0;
};

inline std::vector<CompareRow> compareSearch(const SimDesign &design, const std::vector<int> &pGrid,
                                             const ScorerConfig &scorerTemplate, const SearchConfig &s5Cfg,
                                             const SearchConfig &sssCfg, int replicates) {
    std::vector<CompareRow> rows;
    for (int p : pGrid) {
        CompareRow s5{p, "s5"}, sss{p, "sss"};
        int agree = 0;
        for (int r = 0; r < replicates; ++r) {
            SimDesign d = design;
            d.p = p;
            const Simulated sim = simulate(replicateDesign(d, r));
            Model maps[2];
            CompareRow *acc[2] = {&s5, &sss};
            const SearchConfig *cfgs[2] = {&s5Cfg, &sssCfg};
            for (int a = 0; a < 2; ++a) {
                SearchConfig sc = *cfgs[a];
                sc.seed = deriveSeed(cfgs[a]->seed, static_cast<std::uint64_t>(r));
                const Ledger ledger = searchLedger(sim.data, scorerTemplate, sc);
                const PosteriorSummary ps = posteriorSummary(ledger);
                maps[a] = ps.map;
                const auto &e = ledger.entry(ps.map);
                acc[a]->meanWallSeconds += ledger.wallSeconds;
                acc[a]->meanSecondsToMap += e.seconds;
                acc[a]->meanModelsBeforeMap += static_cast<double>(e.firstHit);
                acc[a]->meanDistinctModels += static_cast<double>(ledger.size());
            }
            if (maps[0] == maps[1]) ++agree;
        }
        for (CompareRow *row : {&s5, &sss}) {
            row->replicates = replicates;
            row->meanWallSeconds /= replicates;
            row->meanSecondsToMap /= replicates;
            row->meanModelsBeforeMap /= replicates;
            row->meanDistinctModels /= replicates;
            row->mapAgreement = static_cast<double>(agree) / replicates;
        }
        rows.push_back(s5);
        rows.push_back(sss);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Posterior concentration and oracle hyperparameters

struct ConcentrationResult {
    double meanTrueProb = 0;  ///< ledger-normalised posterior of the true model
    double meanOddsCount = 0; ///< models with odds vs MAP above 0.001
    double mapIsTruthRate = 0;
    int replicates = 0;
};

inline ConcentrationResult posteriorConcentration(const SimDesign &design, const ScorerConfig &scorerCfg,
                                                  const SearchConfig &search, int replicates, double oddsFloor = 1e-3) {
    ConcentrationResult out;
    out.replicates = replicates;
    for (int r = 0; r < replicates; ++r) {
        const Simulated sim = simulate(replicateDesign(design, r));
        SearchConfig sc = search;
        sc.seed = deriveSeed(search.seed, static_cast<std::uint64_t>(r));
        const PosteriorSummary ps = posteriorSummary(searchLedger(sim.data, scorerCfg, sc), oddsFloor);
        out.meanTrueProb += ps.prob(design.trueModel);
        out.meanOddsCount += ps.oddsCount;
        out.mapIsTruthRate += ps.map == design.trueModel ? 1.0 : 0.0;
    }
    out.meanTrueProb /= replicates;
    out.meanOddsCount /= replicates;
    out.mapIsTruthRate /= replicates;
    return out;
}

struct OracleSweepResult {
    std::vector<double> grid;
    std::vector<double> argmaxPerReplicate; ///< grid value maximising pi(t | y)
    std::vector<double> meanTrueProb;       ///< per grid value
    double meanArgmax = 0;
};

/// Per replicate, the grid value that maximises the ledger-normalised
/// posterior probability of the true model (first maximiser on ties).
inline OracleSweepResult oracleSweep(const SimDesign &design, const ScorerConfig &scorerTemplate,
                                     const std::vector<double> &grid, int replicates, const SearchConfig &search) {
    if (grid.empty()) throw DomainError("hyperparameter grid is empty");
    OracleSweepResult out;
    out.grid = grid;
    out.meanTrueProb.assign(grid.size(), 0.0);
    for (int r = 0; r < replicates; ++r) {
        const Simulated sim = simulate(replicateDesign(design, r));
        SearchConfig sc = search;
        sc.seed = deriveSeed(search.seed, static_cast<std::uint64_t>(r));
        std::size_t best = 0;
        double bestProb = -1;
        for (std::size_t g = 0; g < grid.size(); ++g) {
            const double pt = posteriorSummary(searchLedger(sim.data, withHyper(scorerTemplate, grid[g]), sc)).prob(design.trueModel);
            out.meanTrueProb[g] += pt / replicates;
            if (pt > bestProb) {
                bestProb = pt;
                best = g;
            }
        }
        out.argmaxPerReplicate.push_back(grid[best]);
    }
    out.meanArgmax = std::accumulate(out.argmaxPerReplicate.begin(), out.argmaxPerReplicate.end(), 0.0) /
                     std::max<std::size_t>(1, out.argmaxPerReplicate.size());
    return out;
}

inline std::vector<double> defaultTauGrid() { return {1, 1.5, 2, 2.5, 3, 3.5, 4, 6, 8, 12}; }
inline std::vector<double> defaultGGrid() { return {1e3, 1e6, 1e8, 1e9, 1e10, 1e11, 1e12, 1e13}; }

} // namespace nlsel
