#pragma once
// Log marginal likelihoods and log posterior scores of single models.
//
//  * g-prior: closed form in the coefficient of determination.
//  * peMoM / piMoM: Laplace approximation around the posterior mode of the
//    joint log density f(beta, sigma2) (sigma2 optional when known).
//  * quadratureLogMarginal: adaptive quadrature for |k| <= 2, used to check
//    the Laplace route.
//
// All log marginals keep every model-size dependent constant, including the
// (2 pi)^{-n/2} likelihood factor and the inverse-gamma normaliser, so that
// Laplace and quadrature values are directly comparable.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "nlsel/core.hpp"
#include "nlsel/priors.hpp"

namespace nlsel {

inline constexpr double kPosInf = std::numeric_limits<double>::infinity();

struct KnownVariance {
    double sigma2 = 1.0;
};

struct InverseGammaVariance {
    double a0 = 0.1;
    double b0 = 0.1;
};

using SigmaMode = std::variant<KnownVariance, InverseGammaVariance>;

struct OptimizerConfig {
    int maxIter = 200;
    double gradTol = 1e-8;
    /// Initial coefficients are pushed away from zero to at least
    /// clampScale * (tau / n)^{1/4} in magnitude.
    double clampScale = 1.0;
};

struct ScorerConfig {
    CoefPrior coefPrior;
    ModelPrior modelPrior;
    SigmaMode sigma = InverseGammaVariance{};
    OptimizerConfig optimizer;
};

struct LaplaceResult {
    double logMarginal = kNegInf;
    VectorXd mode; ///< beta*, followed by sigma2* when the variance is integrated
    double negHessianLogDet = 0.0;
    bool converged = false;
    int iterations = 0;
    double gradInfNorm = kPosInf;
};

inline bool knownVariance(const ScorerConfig &cfg) { return std::holds_alternative<KnownVariance>(cfg.sigma); }

inline void validate(const ScorerConfig &cfg) {
    if (auto kv = std::get_if<KnownVariance>(&cfg.sigma)) {
        if (!(kv->sigma2 > 0)) throw DomainError("known sigma2 must be positive");
    } else {
        const auto &ig = std::get<InverseGammaVariance>(cfg.sigma);
        if (!(ig.a0 > 0) || !(ig.b0 > 0)) throw DomainError("inverse-gamma a0 and b0 must be positive");
    }
    if (cfg.coefPrior.tau && !(*cfg.coefPrior.tau > 0)) throw DomainError("tau must be positive");
    if (cfg.coefPrior.family == PriorFamily::PiMoM && cfg.coefPrior.r < 1) throw DomainError("piMoM order r must be >= 1");
    if (cfg.coefPrior.family == PriorFamily::GPrior && cfg.coefPrior.g && !(*cfg.coefPrior.g > 0)) throw DomainError("g must be positive");
    if (cfg.optimizer.maxIter < 1 || !(cfg.optimizer.gradTol > 0)) throw DomainError("invalid optimizer settings");
}

/// Warning text when tau does not exceed log p (outside the growth regime
/// the nonlocal priors are designed for).
inline std::optional<std::string> tauGrowthWarning(double tau, int p) {
    if (p > 1 && tau <= std::log(static_cast<double>(p)))
        return "tau = " + std::to_string(tau) + " <= log(p) = " + std::to_string(std::log(static_cast<double>(p))) +
               "; nonlocal penalty may be too weak for this many covariates";
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Joint log density of (beta, sigma2) for a nonlocal prior

/// f(beta, sigma2) = log likelihood + log coefficient prior (+ log IG prior),
/// with analytic gradient and Hessian.  When the variance is known the
/// dimension is |k| and sigma2 is held fixed; otherwise it is |k| + 1 with
/// sigma2 as the last coordinate.
class NonlocalObjective {
  public:
    NonlocalObjective(const ModelSystem &sys, int n, PriorFamily family, double tau, int r, const SigmaMode &sigma)
        : sys_(sys), n_(n), family_(family), tau_(tau), r_(r) {
        if (family != PriorFamily::PeMoM && family != PriorFamily::PiMoM)
            throw DomainError("nonlocal objective needs the peMoM or piMoM family");
        if (!(tau > 0)) throw DomainError("tau must be positive");
        if (family == PriorFamily::PiMoM && r < 1) throw DomainError("piMoM order r must be >= 1");
        if (auto kv = std::get_if<KnownVariance>(&sigma)) {
            known_ = true;
            sigma2_ = kv->sigma2;
        } else {
            const auto &ig = std::get<InverseGammaVariance>(sigma);
            a0_ = ig.a0;
            b0_ = ig.b0;
        }
        const double k = sys.size();
        // exponent of sigma2 in the joint density
        shape_ = n_ / 2.0 + (known_ ? 0.0 : a0_ + 1.0) + (family_ == PriorFamily::PeMoM ? k / 2.0 : 0.0);
    }

    int coefDim() const { return sys_.size(); }
    int dim() const { return coefDim() + (known_ ? 0 : 1); }
    bool variancePinned() const { return known_; }
    double tau() const { return tau_; }

    double value(const VectorXd &beta, double s) const {
        const int k = coefDim();
        const double rss = sys_.rss(beta);
        double f = -0.5 * n_ * std::log(2.0 * std::numbers::pi) - rss / (2.0 * s);
        for (int j = 0; j < k; ++j)
            if (beta[j] == 0.0) return kNegInf;
        if (family_ == PriorFamily::PeMoM) {
            // -(n/2 + k/2) log s  and  -k log C  pieces
            f -= 0.5 * (n_ + k) * std::log(s);
            f -= beta.squaredNorm() / (2.0 * s * tau_);
            f -= tau_ * beta.array().square().inverse().sum();
            f -= 0.5 * k * std::log(2.0 * std::numbers::pi * tau_);
            f += k * std::sqrt(2.0 / s);
        } else {
            f -= 0.5 * n_ * std::log(s);
            f -= r_ * beta.array().square().log().sum();
            f -= tau_ * beta.array().square().inverse().sum();
            f -= k * pimomLogNormalizer(tau_, r_);
        }
        if (!known_) f += a0_ * std::log(b0_) - std::lgamma(a0_) - (a0_ + 1.0) * std::log(s) - b0_ / s;
        return f;
    }

    VectorXd gradient(const VectorXd &beta, double s) const {
        const int k = coefDim();
        VectorXd g(dim());
        const VectorXd cr = sys_.crossResidual(beta);
        const Eigen::ArrayXd b = beta.array();
        Eigen::ArrayXd gb = cr.array() / s + 2.0 * tau_ / b.cube();
        if (family_ == PriorFamily::PeMoM) gb -= b / (s * tau_);
        else gb -= 2.0 * r_ / b;
        g.head(k) = gb.matrix();
        if (!known_) g[k] = -shape_ / s + numerator(beta) / (s * s) - peCoef() * std::pow(s, -1.5);
        return g;
    }

    /// Hessian of f (the negative of the Laplace matrix V).
    MatrixXd hessian(const VectorXd &beta, double s) const {
        const int k = coefDim();
        MatrixXd H(dim(), dim());
        H.topLeftCorner(k, k) = -sys_.gram / s;
        const Eigen::ArrayXd b = beta.array();
        Eigen::ArrayXd diag = -6.0 * tau_ / b.square().square();
        if (family_ == PriorFamily::PeMoM) diag -= 1.0 / (s * tau_);
        else diag += 2.0 * r_ / b.square();
        H.topLeftCorner(k, k).diagonal() += diag.matrix();
        if (!known_) {
            VectorXd hbs = -sys_.crossResidual(beta) / (s * s);
            if (family_ == PriorFamily::PeMoM) hbs += beta / (s * s * tau_);
            H.col(k).head(k) = hbs;
            H.row(k).head(k) = hbs.transpose();
            H(k, k) = shape_ / (s * s) - 2.0 * numerator(beta) / (s * s * s) + 1.5 * peCoef() * std::pow(s, -2.5);
        }
        return H;
    }

    /// argmax over sigma2 of f(beta, .) (closed form); the fixed value when known.
    double profiledVariance(const VectorXd &beta) const {
        if (known_) return sigma2_;
        const double B = numerator(beta);
        const double c = peCoef();
        if (c == 0.0) return B / shape_;
        // shape u^2 + c u - B = 0 with u = sqrt(sigma2)
        const double u = 2.0 * B / (c + std::sqrt(c * c + 4.0 * shape_ * B));
        return u * u;
    }

    /// Hessian in beta of f(beta, profiledVariance(beta)).
    MatrixXd profiledHessian(const VectorXd &beta, double s) const {
        const int k = coefDim();
        MatrixXd H = hessian(beta, s);
        if (known_) return H;
        MatrixXd out = H.topLeftCorner(k, k);
        const double hss = H(k, k);
        if (hss < 0) out -= H.col(k).head(k) * H.row(k).head(k) / hss;
        return out;
    }

  private:
    // B in f = ... - B / sigma2: the sigma2^{-1} coefficient
    double numerator(const VectorXd &beta) const {
        double B = 0.5 * sys_.rss(beta) + b0_;
        if (family_ == PriorFamily::PeMoM) B += beta.squaredNorm() / (2.0 * tau_);
        return B;
    }
    // coefficient c in  -c sigma2^{-3/2} of df/dsigma2 (from k sqrt(2/sigma2))
    double peCoef() const { return family_ == PriorFamily::PeMoM ? coefDim() / std::numbers::sqrt2 : 0.0; }

    const ModelSystem &sys_;
    int n_;
    PriorFamily family_;
    double tau_;
    int r_;
    bool known_ = false;
    double sigma2_ = 1.0;
    double a0_ = 0.0, b0_ = 0.0;
    double shape_ = 0.0;
};

namespace detail {

struct ModeSearch {
    VectorXd beta;
    double s = 0;
    double f = kNegInf;
    bool converged = false;
    int iterations = 0;
    double gradInfNorm = kPosInf;
};

/// Newton ascent on the variance-profiled objective, with a damped Cholesky
/// step, backtracking, and steps capped so no coefficient changes sign.
inline ModeSearch newtonAscent(const NonlocalObjective &obj, VectorXd beta, const OptimizerConfig &opt) {
    ModeSearch out;
    const int k = obj.coefDim();
    double s = obj.profiledVariance(beta);
    double fv = obj.value(beta, s);
    if (!std::isfinite(fv)) {
        out.beta = beta;
        return out;
    }
    for (int it = 0; it < opt.maxIter; ++it) {
        out.iterations = it + 1;
        const VectorXd g = obj.gradient(beta, s);
        const double gn = g.lpNorm<Eigen::Infinity>();
        out.gradInfNorm = gn;
        if (gn <= opt.gradTol) {
            out.converged = true;
            break;
        }
        const MatrixXd M = -obj.profiledHessian(beta, s);
        Eigen::LLT<MatrixXd> llt(M);
        double lambda = 0.0;
        const double base = std::max(1.0, M.diagonal().cwiseAbs().maxCoeff());
        while (llt.info() != Eigen::Success) {
            lambda = lambda == 0.0 ? 1e-10 * base : lambda * 10.0;
            if (lambda > 1e20 * base) break;
            llt.compute(M + lambda * MatrixXd::Identity(k, k));
        }
        if (llt.info() != Eigen::Success) break;
        const VectorXd gb = g.head(k);
        const VectorXd d = llt.solve(gb);
        const double slope = gb.dot(d);
        double t = 1.0;
        for (int j = 0; j < k; ++j)
            if (d[j] * beta[j] < 0) t = std::min(t, 0.9 * std::abs(beta[j]) / std::abs(d[j]));
        bool accepted = false;
        if (t * slope <= 1e-12 * (1.0 + std::abs(fv))) {
            // Gain below the resolution of f: judge the step by the gradient instead.
            const VectorXd trial = beta + t * d;
            const double st = obj.profiledVariance(trial);
            const double ft = obj.value(trial, st);
            if (std::isfinite(ft) && obj.gradient(trial, st).lpNorm<Eigen::Infinity>() < gn) {
                beta = trial;
                s = st;
                fv = std::max(fv, ft);
                continue;
            }
        }
        for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
            const VectorXd trial = beta + t * d;
            const double st = obj.profiledVariance(trial);
            const double ft = obj.value(trial, st);
            if (std::isfinite(ft) && ft >= fv + 1e-4 * t * slope) {
                beta = trial;
                s = st;
                fv = ft;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            // No ascent possible in floating point; accept if at the rounding floor.
            out.converged = gn <= std::max(opt.gradTol, 1e-6);
            break;
        }
    }
    if (!out.converged) {
        const double gn = obj.gradient(beta, s).lpNorm<Eigen::Infinity>();
        out.gradInfNorm = gn;
        out.converged = gn <= opt.gradTol;
    }
    out.beta = std::move(beta);
    out.s = s;
    out.f = fv;
    return out;
}

inline double logDetSpd(const Eigen::LLT<MatrixXd> &llt) {
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

} // namespace detail

/// Exact log marginal of the empty model (no coefficients to integrate).
inline double emptyModelLogMarginal(const Dataset &data, const SigmaMode &sigma) {
    const double n = data.n();
    const double yty = data.y.squaredNorm();
    if (auto kv = std::get_if<KnownVariance>(&sigma))
        return -0.5 * n * std::log(2.0 * std::numbers::pi * kv->sigma2) - yty / (2.0 * kv->sigma2);
    const auto &ig = std::get<InverseGammaVariance>(sigma);
    return -0.5 * n * std::log(2.0 * std::numbers::pi) + ig.a0 * std::log(ig.b0) - std::lgamma(ig.a0) +
           std::lgamma(n / 2.0 + ig.a0) - (n / 2.0 + ig.a0) * std::log(yty / 2.0 + ig.b0);
}

/// Laplace approximation from a prebuilt model system.
inline LaplaceResult laplaceLogMarginal(const ModelSystem &sys, const Dataset &data, PriorFamily family,
                                        const ScorerConfig &cfg) {
    LaplaceResult res;
    const int n = data.n(), k = sys.size();
    if (k == 0) {
        res.logMarginal = emptyModelLogMarginal(data, cfg.sigma);
        res.converged = true;
        res.gradInfNorm = 0.0;
        if (!knownVariance(cfg)) {
            const auto &ig = std::get<InverseGammaVariance>(cfg.sigma);
            res.mode = VectorXd::Constant(1, (sys.yty / 2.0 + ig.b0) / (n / 2.0 + ig.a0 + 1.0));
        }
        return res;
    }
    const double tau = resolveTau(cfg.coefPrior, n, data.p());
    const NonlocalObjective obj(sys, n, family, tau, cfg.coefPrior.r, cfg.sigma);

    const double delta = cfg.optimizer.clampScale * std::pow(tau / n, 0.25);
    VectorXd start = sys.betaHat;
    for (int j = 0; j < k; ++j) start[j] = (start[j] < 0 ? -1.0 : 1.0) * std::max(std::abs(start[j]), delta);

    detail::ModeSearch ms = detail::newtonAscent(obj, start, cfg.optimizer);
    if (!ms.converged) ms = detail::newtonAscent(obj, 1.5 * start, cfg.optimizer);

    res.iterations = ms.iterations;
    res.gradInfNorm = ms.gradInfNorm;
    res.mode.resize(obj.dim());
    res.mode.head(k) = ms.beta;
    if (!obj.variancePinned()) res.mode[k] = ms.s;
    if (!ms.converged) return res;

    const Eigen::LLT<MatrixXd> llt(-obj.hessian(ms.beta, ms.s));
    if (llt.info() != Eigen::Success) return res; // singular / indefinite Hessian at the mode
    res.negHessianLogDet = detail::logDetSpd(llt);
    res.logMarginal = 0.5 * obj.dim() * std::log(2.0 * std::numbers::pi) - 0.5 * res.negHessianLogDet + ms.f;
    res.converged = std::isfinite(res.logMarginal);
    if (!res.converged) res.logMarginal = kNegInf;
    return res;
}

/// Laplace log marginal under the peMoM prior.  Throws SingularGram.
inline LaplaceResult pemomLogMarginalLaplace(const Dataset &data, const Model &k, const ScorerConfig &cfg) {
    const ModelSystem sys(data, k);
    return laplaceLogMarginal(sys, data, PriorFamily::PeMoM, cfg);
}

/// Laplace log marginal under the piMoM prior.  Throws SingularGram.
inline LaplaceResult pimomLogMarginalLaplace(const Dataset &data, const Model &k, const ScorerConfig &cfg) {
    const ModelSystem sys(data, k);
    return laplaceLogMarginal(sys, data, PriorFamily::PiMoM, cfg);
}

// ---------------------------------------------------------------------------
// g-prior

inline double gpriorLogMarginalFromRss(double rss, double yty, int n, int k, double g) {
    // 1 - D^2 = R*_k / y^T y  (y centred)
    const double oneMinusD2 = yty > 0 ? std::clamp(rss / yty, 0.0, 1.0) : 1.0;
    return -0.5 * k * std::log1p(g) - 0.5 * (n - 1) * std::log1p(g * oneMinusD2);
}

/// log m_k(y) up to a model-independent constant:
///   -(|k|/2) log(1+g) - ((n-1)/2) log(1 + g (1 - D_k^2)).
inline double gpriorLogMarginal(const Dataset &data, const Model &k, double g) {
    if (!(g > 0)) throw DomainError("g must be positive");
    const ModelSystem sys(data, k);
    return gpriorLogMarginalFromRss(sys.rssHat, sys.yty, data.n(), static_cast<int>(k.size()), g);
}

/// Model-independent constant separating gpriorLogMarginal from the exact
/// marginal with a flat intercept and pi(sigma2) ∝ 1/sigma2.
inline double gpriorLogMarginalOffset(const Dataset &data, double g) {
    const double n = data.n();
    const double yty = data.y.squaredNorm();
    return -0.5 * (n - 1) * std::log(2.0 * std::numbers::pi) - 0.5 * std::log(n) + std::lgamma((n - 1) / 2.0) -
           0.5 * (n - 1) * std::log(yty / 2.0) + 0.5 * (n - 1) * std::log1p(g);
}

// ---------------------------------------------------------------------------
// Quadrature oracle

enum class QuadratureRegion { Full, PositiveOrthant };

namespace detail {

inline double logSumExpPair(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

/// log of  sum_m c^m/m! Gamma(alpha1 + m/2) B^{-(alpha1 + m/2)}, which is
/// the integral over sigma2 of sigma2^{-(alpha1+1)} exp(-B/sigma2 + c/sigma).
class PemomVarianceSeries {
  public:
    PemomVarianceSeries(double alpha1, double c) : alpha1_(alpha1), logc_(std::log(c)), c_(c) {
        for (int m = 0; m < kTerms; ++m)
            coef_[m] = (m == 0 ? 0.0 : m * logc_) - std::lgamma(m + 1.0) + std::lgamma(alpha1_ + 0.5 * m);
    }

    double operator()(double B) const {
        const double logB = std::log(B);
        if (c_ == 0.0) return coef_[0] - alpha1_ * logB;
        double best = kNegInf;
        double terms[kTerms];
        int used = 0;
        for (int m = 0; m < kTerms; ++m) {
            terms[m] = coef_[m] - (alpha1_ + 0.5 * m) * logB;
            best = std::max(best, terms[m]);
            used = m + 1;
            if (m > 4 && terms[m] < best - 45.0 && terms[m] < terms[m - 1]) break;
        }
        double acc = 0.0;
        for (int m = 0; m < used; ++m) acc += std::exp(terms[m] - best);
        return best + std::log(acc);
    }

  private:
    static constexpr int kTerms = 600;
    double alpha1_, logc_, c_;
    double coef_[kTerms];
};

/// Log of the integrand over beta after the variance has been integrated out
/// (or fixed), for families and variance modes supported by the oracle.
class BetaIntegrand {
  public:
    BetaIntegrand(const Dataset &data, const Model &k, const ModelSystem &sys, const ScorerConfig &cfg)
        : data_(data), model_(k), sys_(sys), cfg_(cfg), n_(data.n()), kk_(static_cast<int>(k.size())) {
        tau_ = resolveTau(cfg.coefPrior, n_, data.p());
        if (cfg.coefPrior.family == PriorFamily::GPrior && kk_ > 0)
            logDetG_ = 2.0 * sys.chol.matrixLLT().diagonal().array().log().sum();
        if (!knownVariance(cfg) && cfg.coefPrior.family == PriorFamily::PeMoM) {
            const auto &ig = std::get<InverseGammaVariance>(cfg.sigma);
            series_.emplace(n_ / 2.0 + kk_ / 2.0 + ig.a0, kk_ * std::numbers::sqrt2);
        }
    }

    double operator()(const VectorXd &beta) const {
        const double rss = sys_.rss(beta);
        const auto family = cfg_.coefPrior.family;
        if (family == PriorFamily::GPrior) {
            // flat intercept, pi(sigma2) ∝ 1/sigma2, sigma2 integrated analytically
            const double g = resolveG(cfg_.coefPrior, n_);
            const double Q = rss + (kk_ > 0 ? beta.dot(sys_.gram * beta) / g : 0.0);
            const double m = (n_ - 1 + kk_) / 2.0;
            return -0.5 * (n_ - 1 + kk_) * std::log(2.0 * std::numbers::pi) - 0.5 * std::log(double(n_)) -
                   0.5 * kk_ * std::log(g) + 0.5 * logDetG_ + std::lgamma(m) - m * std::log(Q / 2.0);
        }
        if (auto kv = std::get_if<KnownVariance>(&cfg_.sigma)) {
            const double s = kv->sigma2;
            const double loglik = -0.5 * n_ * std::log(2.0 * std::numbers::pi * s) - rss / (2.0 * s);
            const double lp = family == PriorFamily::PeMoM ? pemomLogDensity(beta, s, tau_)
                                                           : pimomLogDensity(beta, s, tau_, cfg_.coefPrior.r);
            return loglik + lp;
        }
        const auto &ig = std::get<InverseGammaVariance>(cfg_.sigma);
        const double igConst = ig.a0 * std::log(ig.b0) - std::lgamma(ig.a0);
        if (family == PriorFamily::PiMoM) {
            const double lp = pimomLogDensity(beta, 1.0, tau_, cfg_.coefPrior.r);
            if (lp == kNegInf) return kNegInf;
            return lp - 0.5 * n_ * std::log(2.0 * std::numbers::pi) + igConst + std::lgamma(n_ / 2.0 + ig.a0) -
                   (n_ / 2.0 + ig.a0) * std::log(rss / 2.0 + ig.b0);
        }
        // peMoM: sigma2 enters the prior; integrate with the series above
        double inv = 0.0;
        for (int j = 0; j < kk_; ++j) {
            if (beta[j] == 0.0) return kNegInf;
            inv += 1.0 / (beta[j] * beta[j]);
        }
        const double B = rss / 2.0 + beta.squaredNorm() / (2.0 * tau_) + ig.b0;
        return -0.5 * (n_ + kk_) * std::log(2.0 * std::numbers::pi) - 0.5 * kk_ * std::log(tau_) - tau_ * inv +
               igConst + (*series_)(B);
    }

  private:
    const Dataset &data_;
    const Model &model_;
    const ModelSystem &sys_;
    const ScorerConfig &cfg_;
    int n_, kk_;
    double tau_ = 1.0;
    double logDetG_ = 0.0;
    std::optional<PemomVarianceSeries> series_;
};

/// Integral of exp(logf) over [lo, hi] split at the given interior points.
/// The outer integral of a nested pair needs a looser tolerance than the
/// inner one, since the inner result is only smooth up to its own error.
template <class F> double integratePieces(F &&f, std::vector<double> pts, double tol = 1e-11, unsigned depth = 12) {
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        if (pts[i + 1] - pts[i] <= 0) continue;
        total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, pts[i], pts[i + 1], depth, tol);
    }
    return total;
}

/// Break points on one coordinate: zero, around the likelihood centre, and
/// at the nonlocal scale, within [-limit, limit] (or [0, limit]).
inline std::vector<double> breakPoints(double centre, double sd, double delta, bool positiveOnly) {
    const double a = std::abs(centre);
    const double limit = a + 40.0 * sd + 10.0 * delta;
    std::vector<double> pts{0.0, limit};
    for (double v : {a, a - 6 * sd, a + 6 * sd, a - 12 * sd, a + 12 * sd, delta, 2 * delta, 4 * delta, delta / 2})
        if (v > 0 && v < limit) pts.push_back(v);
    if (!positiveOnly) {
        const std::size_t m = pts.size();
        for (std::size_t i = 0; i < m; ++i)
            if (pts[i] > 0) pts.push_back(-pts[i]);
    }
    return pts;
}

} // namespace detail

/// log of the integral of likelihood x priors over (beta, sigma2), for
/// |k| <= 2.  Throws DimensionTooLarge for larger models.
///
/// The g-prior is integrated with a flat intercept and pi(sigma2) ∝ 1/sigma2,
/// so it matches gpriorLogMarginal + gpriorLogMarginalOffset.
inline double quadratureLogMarginal(const Dataset &data, const Model &k, const ScorerConfig &cfg,
                                    QuadratureRegion region = QuadratureRegion::Full) {
    if (k.size() > 2) throw DimensionTooLarge("quadrature oracle supports at most two coefficients");
    const auto family = cfg.coefPrior.family;
    if (family == PriorFamily::ReducedRlasso) throw DomainError("reduced rlasso has no marginal likelihood");
    const ModelSystem sys(data, k);
    const detail::BetaIntegrand logf(data, k, sys, cfg);
    if (k.empty()) return logf(VectorXd());

    const int n = data.n(), kk = static_cast<int>(k.size());
    const double tau = resolveTau(cfg.coefPrior, n, data.p());
    const double delta = family == PriorFamily::GPrior ? 0.0 : std::pow(tau / n, 0.25);
    double s = knownVariance(cfg) ? std::get<KnownVariance>(cfg.sigma).sigma2 : sys.rssHat / std::max(1, n - kk);
    s = std::max(s, 1e-12 * std::max(sys.yty, 1.0) / n);
    const bool positive = region == QuadratureRegion::PositiveOrthant;
    const MatrixXd ginv = sys.chol.solve(MatrixXd::Identity(kk, kk));

    VectorXd ref = sys.betaHat;
    for (int j = 0; j < kk; ++j) {
        const double floorMag = std::max(delta, 1e-8);
        if (std::abs(ref[j]) < floorMag) ref[j] = floorMag;
        if (positive) ref[j] = std::abs(ref[j]);
    }
    const double shift = logf(ref);
    if (!std::isfinite(shift)) return kNegInf;

    double integral = 0.0;
    if (kk == 1) {
        auto f = [&](double b) {
            VectorXd v(1);
            v << b;
            return std::exp(logf(v) - shift);
        };
        integral = detail::integratePieces(f, detail::breakPoints(sys.betaHat[0], std::sqrt(s * ginv(0, 0)), delta, positive));
    } else {
        const double g10 = sys.gram(1, 0), g11 = sys.gram(1, 1);
        const double condSd = std::sqrt(s / g11);
        auto outer = [&](double b0) {
            const double centre = sys.betaHat[1] - g10 / g11 * (b0 - sys.betaHat[0]);
            auto inner = [&](double b1) {
                VectorXd v(2);
                v << b0, b1;
                return std::exp(logf(v) - shift);
            };
            return detail::integratePieces(inner, detail::breakPoints(centre, condSd, delta, positive), 1e-9, 8);
        };
        integral = detail::integratePieces(outer, detail::breakPoints(sys.betaHat[0], std::sqrt(s * ginv(0, 0)), delta, positive), 1e-6, 6);
    }
    if (!(integral > 0)) return kNegInf;
    return shift + std::log(integral);
}

// ---------------------------------------------------------------------------
// Reduced rlasso and asymptotic penalty

/// ||y - X_k b||^2 + sum_j tau / |b_j| at the OLS estimate b.  Lower is
/// better.  +inf for a zero coefficient or a singular Gram matrix.
inline double reducedRlassoScore(const Dataset &data, const Model &k, double tau) {
    try {
        const ModelSystem sys(data, k);
        double pen = 0.0;
        for (int j = 0; j < sys.size(); ++j) {
            if (sys.betaHat[j] == 0.0) return kPosInf;
            pen += tau / std::abs(sys.betaHat[j]);
        }
        return sys.rssHat + pen;
    } catch (const SingularGram &) {
        return kPosInf;
    }
}

/// Asymptotic per-coefficient penalty of the nonlocal marginal likelihood:
/// sqrt(n tau uK) below the threshold c (n uK / tau)^{-1/4}, tau / b^2 above.
inline double asymptoticPenaltyThreshold(double tau, int n, double uK, double c = 1.0) {
    return c * std::pow(n * uK / tau, -0.25);
}

inline double asymptoticPenalty(double betaHatJ, double tau, int n, double uK, double c = 1.0) {
    if (!(tau > 0) || n <= 0 || !(uK > 0)) throw DomainError("asymptotic penalty needs positive n, tau and uK");
    if (std::abs(betaHatJ) < asymptoticPenaltyThreshold(tau, n, uK, c)) return std::sqrt(n * tau * uK);
    return tau / (betaHatJ * betaHatJ);
}

// ---------------------------------------------------------------------------
// Posterior score

struct ScoreOutcome {
    double score = kNegInf;
    std::string warning; ///< empty unless the score was forced to -inf by a failure
};

/// Unnormalised log posterior log m_k(y) + log pi(k).  Never throws for
/// model-level failures: degenerate or non-converged models get -inf and a
/// warning.
inline ScoreOutcome scoreModel(const Dataset &data, const Model &k, const ScorerConfig &cfg) {
    ScoreOutcome out;
    const int size = static_cast<int>(k.size());
    const double lp = logModelPrior(cfg.modelPrior, size);
    if (lp == kNegInf || size > data.n() - 1) return out;
    try {
        const ModelSystem sys(data, k);
        double lm = kNegInf;
        switch (cfg.coefPrior.family) {
        case PriorFamily::GPrior:
            lm = gpriorLogMarginalFromRss(sys.rssHat, sys.yty, data.n(), size, resolveG(cfg.coefPrior, data.n()));
            break;
        case PriorFamily::PeMoM:
        case PriorFamily::PiMoM: {
            const LaplaceResult r = laplaceLogMarginal(sys, data, cfg.coefPrior.family, cfg);
            if (!r.converged) {
                out.warning = "Laplace mode search did not converge for " + k.str();
                return out;
            }
            lm = r.logMarginal;
            break;
        }
        case PriorFamily::ReducedRlasso: {
            // loss -> log score through a Gaussian kernel with the null-model variance
            const double tau = resolveTau(cfg.coefPrior, data.n(), data.p());
            double pen = 0.0;
            for (int j = 0; j < size; ++j) pen += tau / std::abs(sys.betaHat[j]);
            const double s2 = std::max(sys.yty / (data.n() - 1), 1e-300);
            lm = -(sys.rssHat + pen) / (2.0 * s2);
            break;
        }
        }
        out.score = lm + lp;
        if (std::isnan(out.score)) out.score = kNegInf;
    } catch (const Error &e) {
        out.warning = e.kind() + " for " + k.str() + ": " + e.what();
        out.score = kNegInf;
    }
    return out;
}

inline double logPosteriorScore(const Dataset &data, const Model &k, const ScorerConfig &cfg) {
    return scoreModel(data, k, cfg).score;
}

/// Callable scorer bound to one dataset and configuration.
struct ModelScorer {
    const Dataset *data;
    ScorerConfig cfg;

    ModelScorer(const Dataset &d, ScorerConfig c) : data(&d), cfg(std::move(c)) {}
    ScoreOutcome operator()(const Model &k) const { return scoreModel(*data, k, cfg); }
};

} // namespace nlsel
