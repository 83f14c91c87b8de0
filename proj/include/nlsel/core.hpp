#pragma once
// Shared substrate: datasets, canonical models, per-model least squares and
// ridge algebra, Gram spectra and model neighbourhoods.
//
// Column convention: after standardize() every column has mean 0 and
// X_j^T X_j = n, and y is centred.  There is no intercept column.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nlsel/errors.hpp"

namespace nlsel {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Condition-number ceiling for X_k^T X_k; above it a model is treated as degenerate.
inline constexpr double kMaxGramCondition = 1e12;

// ---------------------------------------------------------------------------
// Model

/// A set of column indices kept in canonical (sorted, duplicate-free) form.
/// Equality, ordering and hashing all act on that canonical list.
class Model {
  public:
    Model() = default;
    Model(std::initializer_list<int> idx) : Model(std::vector<int>(idx)) {}
    explicit Model(std::vector<int> idx) : idx_(std::move(idx)) {
        std::sort(idx_.begin(), idx_.end());
        idx_.erase(std::unique(idx_.begin(), idx_.end()), idx_.end());
    }

    std::span<const int> indices() const noexcept { return idx_; }
    const std::vector<int> &vec() const noexcept { return idx_; }
    std::size_t size() const noexcept { return idx_.size(); }
    bool empty() const noexcept { return idx_.empty(); }
    int operator[](std::size_t i) const { return idx_[i]; }
    auto begin() const noexcept { return idx_.begin(); }
    auto end() const noexcept { return idx_.end(); }

    bool contains(int j) const { return std::binary_search(idx_.begin(), idx_.end(), j); }

    Model with(int j) const {
        Model m;
        m.idx_.reserve(idx_.size() + 1);
        auto pos = std::lower_bound(idx_.begin(), idx_.end(), j);
        m.idx_.insert(m.idx_.end(), idx_.begin(), pos);
        if (pos == idx_.end() || *pos != j) m.idx_.push_back(j);
        m.idx_.insert(m.idx_.end(), pos, idx_.end());
        return m;
    }

    Model without(int j) const {
        Model m;
        m.idx_.reserve(idx_.size());
        for (int v : idx_)
            if (v != j) m.idx_.push_back(v);
        return m;
    }

    /// (k \ {out}) ∪ {in}
    Model swapped(int out, int in) const { return without(out).with(in); }

    bool operator==(const Model &) const = default;
    /// Lexicographic order on the index lists; used for deterministic tie breaks.
    std::strong_ordering operator<=>(const Model &o) const {
        return std::lexicographical_compare_three_way(idx_.begin(), idx_.end(), o.idx_.begin(), o.idx_.end());
    }

    std::string str() const {
        std::ostringstream os;
        os << '{';
        for (std::size_t i = 0; i < idx_.size(); ++i) os << (i ? "," : "") << idx_[i];
        os << '}';
        return os.str();
    }

  private:
    std::vector<int> idx_;
};

struct ModelHash {
    std::size_t operator()(const Model &m) const noexcept {
        std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ m.size();
        for (int v : m) {
            h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
            h *= 0xff51afd7ed558ccdULL;
        }
        return static_cast<std::size_t>(h ^ (h >> 33));
    }
};

// ---------------------------------------------------------------------------
// Dataset

struct Dataset {
    VectorXd y;
    MatrixXd X;
    bool standardized = false;
    VectorXd columnMeans;  ///< recorded by standardize(); empty otherwise
    VectorXd columnScales; ///< X_std = (X_raw - mean) / scale
    double yMean = 0.0;

    Dataset() = default;
    Dataset(VectorXd y_, MatrixXd X_) : y(std::move(y_)), X(std::move(X_)) {}

    int n() const noexcept { return static_cast<int>(X.rows()); }
    int p() const noexcept { return static_cast<int>(X.cols()); }

    /// Shape and finiteness checks.  Throws DomainError / NonFinite.
    void validate() const {
        if (X.rows() != y.size()) throw DomainError("response length does not match design rows");
        if (n() < 2) throw DomainError("need at least two observations");
        if (p() < 1) throw DomainError("need at least one covariate");
        if (!X.allFinite() || !y.allFinite()) throw NonFinite("dataset contains NaN or Inf");
    }
};

/// Centre every column to mean 0 and scale it to X_j^T X_j = n; centre y.
/// Throws ConstantColumn for a zero-variance column and NonFinite on NaN/Inf.
inline Dataset standardize(const Dataset &raw) {
    raw.validate();
    const int n = raw.n(), p = raw.p();
    Dataset out;
    out.X.resize(n, p);
    out.columnMeans.resize(p);
    out.columnScales.resize(p);
    for (int j = 0; j < p; ++j) {
        const double mean = raw.X.col(j).mean();
        const VectorXd centered = raw.X.col(j).array() - mean;
        const double scale = std::sqrt(centered.squaredNorm() / n);
        const double mag = raw.X.col(j).cwiseAbs().maxCoeff();
        if (!(scale > 1e-13 * std::max(1.0, mag))) throw ConstantColumn(j);
        out.columnMeans[j] = mean;
        out.columnScales[j] = scale;
        out.X.col(j) = centered / scale;
    }
    out.yMean = raw.y.mean();
    out.y = raw.y.array() - out.yMean;
    out.standardized = true;
    return out;
}

// ---------------------------------------------------------------------------
// Fits

enum class FitKind { OLS, Ridge };

/// Least-squares (or ridge) fit of y on X_k.
///
/// For OLS, `rss` equals ||residual||^2 = y^T (I - P_k) y.  For ridge, `rss`
/// stores the quadratic form y^T (I - X_k (X_k^T X_k + I/tau)^{-1} X_k^T) y,
/// which exceeds ||residual||^2 by ||beta||^2 / tau.
struct Fit {
    VectorXd beta;
    double rss = 0.0;
    VectorXd residual;
    FitKind kind = FitKind::OLS;
    double tau = 0.0; ///< ridge scale; 0 for OLS
};

inline MatrixXd columns(const Dataset &data, const Model &k) { return data.X(Eigen::all, k.vec()); }

/// Per-model normal-equation system: X_k, its Gram matrix, X_k^T y, and the
/// OLS solution.  Construction throws SingularGram when cond(G) > 1e12.
struct ModelSystem {
    MatrixXd Xk;
    MatrixXd gram;  ///< X_k^T X_k
    VectorXd xty;   ///< X_k^T y
    double yty = 0; ///< y^T y
    Eigen::LLT<MatrixXd> chol;
    VectorXd betaHat; ///< OLS estimate
    double rssHat = 0; ///< R*_k, from the explicit residual
    double minEig = 0, maxEig = 0; ///< extreme eigenvalues of the Gram matrix

    ModelSystem(const Dataset &data, const Model &k) {
        const int n = data.n();
        yty = data.y.squaredNorm();
        if (k.empty()) {
            rssHat = yty;
            return;
        }
        if (static_cast<int>(k.size()) > n - 1)
            throw SingularGram("model size " + std::to_string(k.size()) + " exceeds n-1");
        Xk = columns(data, k);
        gram.resize(k.size(), k.size());
        gram.triangularView<Eigen::Lower>() = Xk.transpose() * Xk;
        gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
        xty = Xk.transpose() * data.y;
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram, Eigen::EigenvaluesOnly);
        minEig = es.eigenvalues()(0);
        maxEig = es.eigenvalues()(es.eigenvalues().size() - 1);
        if (!(minEig > 0) || maxEig / minEig > kMaxGramCondition)
            throw SingularGram("Gram matrix of " + k.str() + " is singular or ill-conditioned");
        chol.compute(gram);
        if (chol.info() != Eigen::Success) throw SingularGram("Cholesky of Gram matrix failed for " + k.str());
        betaHat = chol.solve(xty);
        rssHat = (data.y - Xk * betaHat).squaredNorm();
    }

    int size() const noexcept { return static_cast<int>(betaHat.size()); }

    /// ||y - X_k b||^2 evaluated through the OLS decomposition (exact, non-negative).
    double rss(const VectorXd &b) const {
        if (b.size() == 0) return rssHat;
        const VectorXd d = b - betaHat;
        return rssHat + d.dot(gram * d);
    }

    /// X_k^T (y - X_k b)
    VectorXd crossResidual(const VectorXd &b) const { return xty - gram * b; }
};

/// OLS fit; empty model gives beta = {} and rss = y^T y.  Throws SingularGram.
inline Fit olsFit(const Dataset &data, const Model &k) {
    ModelSystem sys(data, k);
    Fit f;
    f.kind = FitKind::OLS;
    if (k.empty()) {
        f.residual = data.y;
        f.rss = sys.yty;
        return f;
    }
    f.beta = sys.betaHat;
    f.residual = data.y - sys.Xk * f.beta;
    f.rss = f.residual.squaredNorm();
    return f;
}

/// Ridge fit with penalty I/tau.  `rss` holds y^T (I - P~_k) y.
inline Fit ridgeFit(const Dataset &data, const Model &k, double tau) {
    if (!(tau > 0) || !std::isfinite(tau)) throw DomainError("ridge scale tau must be positive and finite");
    if (!data.y.allFinite() || !data.X.allFinite()) throw NonFinite("dataset contains NaN or Inf");
    Fit f;
    f.kind = FitKind::Ridge;
    f.tau = tau;
    const double yty = data.y.squaredNorm();
    if (k.empty()) {
        f.residual = data.y;
        f.rss = yty;
        return f;
    }
    const MatrixXd Xk = columns(data, k);
    MatrixXd A = Xk.transpose() * Xk;
    A.diagonal().array() += 1.0 / tau;
    const VectorXd b = Xk.transpose() * data.y;
    f.beta = A.llt().solve(b);
    f.residual = data.y - Xk * f.beta;
    f.rss = yty - b.dot(f.beta);
    return f;
}

// ---------------------------------------------------------------------------
// Gram spectrum

struct GramSpectrum {
    double nuMin = 0;
    double nuMax = 0;
    double uK = 0; ///< representative eigenvalue for diagnostics; defaults to nuMin
};

/// Extreme eigenvalues of X_k^T X_k / n.  Throws SingularGram when the
/// smallest is below 1e-12 or the model is empty.
inline GramSpectrum gramSpectrum(const Dataset &data, const Model &k) {
    if (k.empty()) throw SingularGram("spectrum of the empty model is undefined");
    const MatrixXd Xk = columns(data, k);
    const MatrixXd G = (Xk.transpose() * Xk) / static_cast<double>(data.n());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(G, Eigen::EigenvaluesOnly);
    const auto &ev = es.eigenvalues();
    if (ev(0) < 1e-12) throw SingularGram("Gram matrix of " + k.str() + " is singular");
    return {ev(0), ev(ev.size() - 1), ev(0)};
}

// ---------------------------------------------------------------------------
// Neighbourhoods

struct Neighborhood {
    std::vector<Model> plus;  ///< one column added (empty when |k| = qn)
    std::vector<Model> minus; ///< one column removed
    std::vector<Model> swap;  ///< one column exchanged for an outside column
};

/// Additions in ascending column order; removals in ascending order of the
/// removed index; swaps ordered by (removed, added).
inline std::vector<Model> additions(const Model &k, int p, int qn) {
    std::vector<Model> out;
    if (static_cast<int>(k.size()) + 1 > qn) return out;
    out.reserve(p - k.size());
    for (int j = 0; j < p; ++j)
        if (!k.contains(j)) out.push_back(k.with(j));
    return out;
}

/// Additions restricted to `candidates` (taken in the order given).
inline std::vector<Model> additionsFrom(const Model &k, int qn, std::span<const int> candidates) {
    std::vector<Model> out;
    if (static_cast<int>(k.size()) + 1 > qn) return out;
    for (int j : candidates)
        if (!k.contains(j)) out.push_back(k.with(j));
    return out;
}

inline std::vector<Model> removals(const Model &k) {
    std::vector<Model> out;
    out.reserve(k.size());
    for (int j : k) out.push_back(k.without(j));
    return out;
}

inline std::vector<Model> swaps(const Model &k, int p) {
    std::vector<Model> out;
    out.reserve(k.size() * (p - k.size()));
    for (int j : k) {
        const Model base = k.without(j);
        for (int l = 0; l < p; ++l)
            if (!k.contains(l)) out.push_back(base.with(l));
    }
    return out;
}

inline Neighborhood neighborhood(const Model &k, int p, int qn) {
    return {additions(k, p, qn), removals(k), swaps(k, p)};
}

} // namespace nlsel
