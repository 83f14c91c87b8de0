#pragma once
// Coefficient priors (peMoM, piMoM, Zellner g-prior) and model-space priors.

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "nlsel/core.hpp"

namespace nlsel {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

enum class PriorFamily { PeMoM, PiMoM, GPrior, ReducedRlasso };

inline std::string toString(PriorFamily f) {
    switch (f) {
    case PriorFamily::PeMoM: return "pemom";
    case PriorFamily::PiMoM: return "pimom";
    case PriorFamily::GPrior: return "gprior";
    case PriorFamily::ReducedRlasso: return "rlasso";
    }
    return "?";
}

/// Coefficient prior.  Only the fields relevant to `family` are read.
/// An unset tau resolves to log(n) log(p) at scoring time.
struct CoefPrior {
    PriorFamily family = PriorFamily::PeMoM;
    std::optional<double> tau;
    int r = 1;
    std::optional<double> g; ///< unset: unit information, g = n
};

inline double defaultTau(int n, int p) { return std::log(static_cast<double>(n)) * std::log(static_cast<double>(p)); }

inline double resolveTau(const CoefPrior &c, int n, int p) { return c.tau ? *c.tau : defaultTau(n, p); }

inline double resolveG(const CoefPrior &c, int n) { return c.g ? *c.g : static_cast<double>(n); }

enum class ModelPriorKind { UniformRestricted, BetaBinomial };

struct ModelPrior {
    ModelPriorKind kind = ModelPriorKind::UniformRestricted;
    int qn = 40; ///< maximum model size
    int p = 0;   ///< number of candidate covariates (beta-binomial only)
};

// ---------------------------------------------------------------------------
// peMoM

/// log C for the peMoM normaliser C = sqrt(2 pi sigma2 tau) exp(-sqrt(2 / sigma2)).
inline double pemomLogNormalizer(double sigma2, double tau) {
    return 0.5 * std::log(2.0 * std::numbers::pi * sigma2 * tau) - std::sqrt(2.0 / sigma2);
}

/// Log density of the product exponential-moment prior.  -inf if any
/// coordinate is exactly zero.
inline double pemomLogDensity(const VectorXd &beta, double sigma2, double tau) {
    if (!(sigma2 > 0) || !(tau > 0)) throw DomainError("peMoM requires sigma2 > 0 and tau > 0");
    double acc = 0.0;
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        const double b2 = beta[j] * beta[j];
        if (b2 == 0.0) return kNegInf;
        acc += -b2 / (2.0 * sigma2 * tau) - tau / b2;
    }
    return acc - static_cast<double>(beta.size()) * pemomLogNormalizer(sigma2, tau);
}

// ---------------------------------------------------------------------------
// piMoM

/// log C* with C* = tau^{-r+1/2} Gamma(r - 1/2).
inline double pimomLogNormalizer(double tau, int r) {
    return (0.5 - r) * std::log(tau) + std::lgamma(r - 0.5);
}

/// Log density of the product inverse-moment prior of order r.  sigma2 does
/// not enter this density and is ignored.
inline double pimomLogDensity(const VectorXd &beta, double /*sigma2*/, double tau, int r) {
    if (r < 1) throw DomainError("piMoM order r must be >= 1");
    if (!(tau > 0)) throw DomainError("piMoM requires tau > 0");
    double acc = 0.0;
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        const double b2 = beta[j] * beta[j];
        if (b2 == 0.0) return kNegInf;
        acc += -r * std::log(b2) - tau / b2;
    }
    return acc - static_cast<double>(beta.size()) * pimomLogNormalizer(tau, r);
}

// ---------------------------------------------------------------------------
// g-prior

/// log N(beta; 0, g sigma2 (X_k^T X_k)^{-1}).  Throws SingularGram.
inline double gpriorLogDensity(const VectorXd &beta, double sigma2, double g, const Dataset &data, const Model &k) {
    if (!(sigma2 > 0) || !(g > 0)) throw DomainError("g-prior requires sigma2 > 0 and g > 0");
    if (beta.size() != static_cast<Eigen::Index>(k.size())) throw DomainError("beta length does not match model size");
    if (k.empty()) return 0.0;
    const ModelSystem sys(data, k);
    const double d = static_cast<double>(k.size());
    // precision = G / (g sigma2); log|precision| = log|G| - d log(g sigma2)
    const double logDetG = 2.0 * sys.chol.matrixLLT().diagonal().array().log().sum();
    const double quad = beta.dot(sys.gram * beta) / (g * sigma2);
    return -0.5 * d * std::log(2.0 * std::numbers::pi) + 0.5 * (logDetG - d * std::log(g * sigma2)) - 0.5 * quad;
}

// ---------------------------------------------------------------------------
// Model-space priors

/// log B(a, b)
inline double logBeta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

/// Unnormalised log prior of a model of size kSize.  The beta-binomial form
/// has rho integrated out under a uniform prior: log B(|k|+1, p-|k|+1).
inline double logModelPrior(const ModelPrior &prior, int kSize) {
    if (kSize < 0 || kSize > prior.qn) return kNegInf;
    switch (prior.kind) {
    case ModelPriorKind::UniformRestricted: return 0.0;
    case ModelPriorKind::BetaBinomial:
        if (kSize > prior.p) return kNegInf;
        return logBeta(kSize + 1.0, prior.p - kSize + 1.0);
    }
    return kNegInf;
}

} // namespace nlsel
