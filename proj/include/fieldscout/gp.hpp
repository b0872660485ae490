#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "fieldscout/common.hpp"

namespace fieldscout {

constexpr double kGpJitter = 1e-6;

struct Hyperparams {
    double sigma_f2 = 1.0; // signal variance
    double ell = 0.05;     // lengthscale, normalised map units
    double sigma_n2 = 0.05; // noise variance

    bool valid() const { return sigma_f2 > 0.0 && ell > 0.0 && sigma_n2 > 0.0; }
};

/// Log-normal priors on (sigma_f2, ell, sigma_n2). The locations encode the
/// expected inter-weed spacing in unit-square coordinates.
struct HyperPriors {
    double mu_sf2 = 0.0, sd_sf2 = 0.5;
    double mu_ell = std::log(0.05), sd_ell = 0.2;
    double mu_sn2 = -3.0, sd_sn2 = 0.3;

    static double lognormal_logpdf(double x, double mu, double sd) {
        double lx = std::log(x);
        double z = (lx - mu) / sd;
        return -lx - std::log(sd) - 0.5 * std::log(2.0 * M_PI) - 0.5 * z * z;
    }

    double log_density(const Hyperparams& t) const {
        return lognormal_logpdf(t.sigma_f2, mu_sf2, sd_sf2) +
               lognormal_logpdf(t.ell, mu_ell, sd_ell) +
               lognormal_logpdf(t.sigma_n2, mu_sn2, sd_sn2);
    }

    // Mode of LogNormal(mu, sd) is exp(mu - sd^2).
    Hyperparams mode() const {
        return {std::exp(mu_sf2 - sd_sf2 * sd_sf2), std::exp(mu_ell - sd_ell * sd_ell),
                std::exp(mu_sn2 - sd_sn2 * sd_sn2)};
    }

    Hyperparams draw(Rng& rng) const {
        return {std::exp(mu_sf2 + sd_sf2 * rng.normal()),
                std::exp(mu_ell + sd_ell * rng.normal()),
                std::exp(mu_sn2 + sd_sn2 * rng.normal())};
    }
};

/// The mission GP uses Matern 3/2; the offline representation stage selects an
/// exponential covariance. One engine serves both.
enum class KernelType { matern32, exponential };

inline double kernel_at(KernelType kind, double r, const Hyperparams& t) {
    switch (kind) {
    case KernelType::matern32: {
        double s = std::sqrt(3.0) * r / t.ell;
        return t.sigma_f2 * (1.0 + s) * std::exp(-s);
    }
    case KernelType::exponential:
        return t.sigma_f2 * std::exp(-r / t.ell);
    }
    return 0.0;
}

inline double kernel_m32(const Vec2& a, const Vec2& b, const Hyperparams& t) {
    if (!t.valid()) throw validation_error("invalid hyperparameters");
    return kernel_at(KernelType::matern32, dist(a, b), t);
}

/// K_XX = K(X,X) + (sigma_n2 + jitter) I.
inline Eigen::MatrixXd build_train_cov(const std::vector<Vec2>& X, const Hyperparams& t,
                                       double jitter = kGpJitter,
                                       KernelType kind = KernelType::matern32) {
    if (X.empty()) throw validation_error("build_train_cov needs at least one point");
    const int n = int(X.size());
    Eigen::MatrixXd K(n, n);
    for (int i = 0; i < n; ++i) {
        K(i, i) = t.sigma_f2 + t.sigma_n2 + jitter;
        for (int j = i + 1; j < n; ++j) {
            double k = kernel_at(kind, dist(X[i], X[j]), t);
            K(i, j) = k;
            K(j, i) = k;
        }
    }
    return K;
}

/// Zero-mean GP conditioned on training data. Immutable once fitted; safe for
/// concurrent read queries.
struct GPModel {
    std::vector<Vec2> X;
    Eigen::VectorXd y;
    Hyperparams theta;
    KernelType kernel = KernelType::matern32;
    double jitter = kGpJitter;
    Eigen::MatrixXd chol;   // lower-triangular factor of K_XX
    Eigen::VectorXd alpha;  // K_XX^{-1} y

    int n_train() const { return int(X.size()); }
};

/// Factor the training covariance. On Cholesky failure the jitter doubles, up
/// to three times, before reporting a numerical error.
inline GPModel fit_gp(const std::vector<Vec2>& X, const std::vector<double>& y,
                      const Hyperparams& theta, KernelType kind = KernelType::matern32,
                      double jitter = kGpJitter) {
    if (!theta.valid()) throw validation_error("invalid hyperparameters");
    if (X.size() != y.size()) throw validation_error("training X/y size mismatch");

    GPModel m;
    m.X = X;
    m.y = Eigen::Map<const Eigen::VectorXd>(y.data(), long(y.size()));
    m.theta = theta;
    m.kernel = kind;
    if (X.empty()) return m; // prior-only model

    double j = jitter;
    for (int attempt = 0; attempt <= 3; ++attempt, j *= 2.0) {
        Eigen::MatrixXd K = build_train_cov(X, theta, j, kind);
        Eigen::LLT<Eigen::MatrixXd> llt(K);
        if (llt.info() == Eigen::Success) {
            m.jitter = j;
            m.chol = llt.matrixL();
            m.alpha = llt.solve(m.y);
            return m;
        }
    }
    throw numerical_error("training covariance not positive definite after jitter escalation");
}

/// Log marginal likelihood N(y | 0, K_XX) plus the log-normal prior density.
/// With no data this reduces to the prior term.
inline double log_posterior(const Hyperparams& theta, const std::vector<Vec2>& X,
                            const std::vector<double>& y,
                            KernelType kind = KernelType::matern32,
                            const HyperPriors& priors = {}, double jitter = kGpJitter) {
    if (!theta.valid()) throw validation_error("invalid hyperparameters");
    double lp = priors.log_density(theta);
    if (X.empty()) return lp;

    Eigen::MatrixXd K = build_train_cov(X, theta, jitter, kind);
    Eigen::LLT<Eigen::MatrixXd> llt(K);
    if (llt.info() != Eigen::Success)
        throw numerical_error("covariance factorisation failed in log_posterior");
    Eigen::Map<const Eigen::VectorXd> yv(y.data(), long(y.size()));
    Eigen::VectorXd a = llt.solve(yv);
    double logdet = 0.0;
    const auto& L = llt.matrixLLT();
    for (int i = 0; i < L.rows(); ++i) logdet += std::log(L(i, i));
    double n = double(y.size());
    return lp - 0.5 * yv.dot(a) - logdet - 0.5 * n * std::log(2.0 * M_PI);
}

struct FitResult {
    Hyperparams theta;
    double log_post = -std::numeric_limits<double>::infinity();
    bool warning = false; // set when every restart failed to factorise
};

namespace detail {

// Nelder-Mead over u = log(theta). Deterministic; the contract is monotone
// improvement over the initial point, not global optimality.
template <typename F>
Eigen::Vector3d nelder_mead(F objective, Eigen::Vector3d start, int max_iter, double* best_val) {
    using V = Eigen::Vector3d;
    const double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;
    std::vector<std::pair<double, V>> simplex;
    simplex.reserve(4);
    simplex.push_back({objective(start), start});
    for (int i = 0; i < 3; ++i) {
        V v = start;
        v[i] += 0.25;
        simplex.push_back({objective(v), v});
    }
    auto order = [&] {
        std::stable_sort(simplex.begin(), simplex.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
    };
    order();
    for (int it = 0; it < max_iter; ++it) {
        if (std::isfinite(simplex[0].first) && std::isfinite(simplex[3].first) &&
            simplex[3].first - simplex[0].first < 1e-10)
            break;
        V centroid = (simplex[0].second + simplex[1].second + simplex[2].second) / 3.0;
        V worst = simplex[3].second;
        V refl = centroid + alpha * (centroid - worst);
        double f_refl = objective(refl);
        if (f_refl < simplex[0].first) {
            V exp_pt = centroid + gamma * (refl - centroid);
            double f_exp = objective(exp_pt);
            simplex[3] = f_exp < f_refl ? std::make_pair(f_exp, exp_pt)
                                        : std::make_pair(f_refl, refl);
        } else if (f_refl < simplex[2].first) {
            simplex[3] = {f_refl, refl};
        } else {
            V contr = centroid + rho * (worst - centroid);
            double f_contr = objective(contr);
            if (f_contr < simplex[3].first) {
                simplex[3] = {f_contr, contr};
            } else {
                for (int i = 1; i < 4; ++i) {
                    simplex[i].second =
                        simplex[0].second + sigma * (simplex[i].second - simplex[0].second);
                    simplex[i].first = objective(simplex[i].second);
                }
            }
        }
        order();
    }
    *best_val = simplex[0].first;
    return simplex[0].second;
}

} // namespace detail

/// MAP hyperparameter estimate: multi-start Nelder-Mead over log-parameters.
/// Start 0 is the supplied init; the rest are prior draws. The returned theta
/// never scores worse than init.
inline FitResult fit_map(const std::vector<Vec2>& X, const std::vector<double>& y,
                         const Hyperparams& init, int restarts = 4,
                         KernelType kind = KernelType::matern32,
                         const HyperPriors& priors = {}, uint64_t seed = 0x5eedf17ULL) {
    if (X.size() < 2) throw validation_error("fit_map needs at least two observations");
    if (restarts < 1) throw validation_error("fit_map needs restarts >= 1");

    auto neg_obj = [&](const Eigen::Vector3d& u) -> double {
        Hyperparams t{std::exp(u[0]), std::exp(u[1]), std::exp(u[2])};
        try {
            return -log_posterior(t, X, y, kind, priors);
        } catch (const numerical_error&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    FitResult best;
    Rng rng(seed);
    for (int r = 0; r < restarts; ++r) {
        Hyperparams start = (r == 0) ? init : priors.draw(rng);
        Eigen::Vector3d u0(std::log(start.sigma_f2), std::log(start.ell),
                           std::log(start.sigma_n2));
        double val = 0.0;
        Eigen::Vector3d u = detail::nelder_mead(neg_obj, u0, 200, &val);
        if (-val > best.log_post) {
            best.log_post = -val;
            best.theta = {std::exp(u[0]), std::exp(u[1]), std::exp(u[2])};
        }
    }
    if (!std::isfinite(best.log_post)) {
        best.theta = init;
        best.warning = true;
        return best;
    }
    // Monotone-improvement contract against the initial point.
    double init_lp;
    try {
        init_lp = log_posterior(init, X, y, kind, priors);
    } catch (const numerical_error&) {
        return best;
    }
    if (init_lp > best.log_post) {
        best.theta = init;
        best.log_post = init_lp;
    }
    return best;
}

/// Posterior mean and latent variance at query points. With no training data:
/// mean 0, variance sigma_f2.
inline void predict(const GPModel& m, const std::vector<Vec2>& Q, std::vector<double>& mean,
                    std::vector<double>& var) {
    const int q = int(Q.size());
    mean.assign(size_t(q), 0.0);
    var.assign(size_t(q), m.theta.sigma_f2);
    if (m.n_train() == 0 || q == 0) return;

    const int n = m.n_train();
    Eigen::MatrixXd Ks(n, q);
    for (int j = 0; j < q; ++j)
        for (int i = 0; i < n; ++i)
            Ks(i, j) = kernel_at(m.kernel, dist(m.X[i], Q[j]), m.theta);

    Eigen::VectorXd mu = Ks.transpose() * m.alpha;
    Eigen::MatrixXd V =
        m.chol.triangularView<Eigen::Lower>().solve(Ks); // L^{-1} K_*
    for (int j = 0; j < q; ++j) {
        mean[size_t(j)] = mu(j);
        double v = m.theta.sigma_f2 - V.col(j).squaredNorm();
        var[size_t(j)] = std::max(0.0, v);
    }
}

/// Full posterior covariance over a waypoint set: K_PP - K_PX K_XX^{-1} K_XP.
inline Eigen::MatrixXd posterior_cov(const GPModel& m, const std::vector<Vec2>& P) {
    if (P.empty()) throw validation_error("posterior_cov needs at least one point");
    const int d = int(P.size());
    Eigen::MatrixXd Kpp(d, d);
    for (int i = 0; i < d; ++i) {
        Kpp(i, i) = m.theta.sigma_f2;
        for (int j = i + 1; j < d; ++j) {
            double k = kernel_at(m.kernel, dist(P[i], P[j]), m.theta);
            Kpp(i, j) = k;
            Kpp(j, i) = k;
        }
    }
    if (m.n_train() == 0) return Kpp;

    const int n = m.n_train();
    Eigen::MatrixXd Ks(n, d);
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < n; ++i)
            Ks(i, j) = kernel_at(m.kernel, dist(m.X[i], P[j]), m.theta);
    Eigen::MatrixXd V = m.chol.triangularView<Eigen::Lower>().solve(Ks);
    Eigen::MatrixXd Sigma = Kpp - V.transpose() * V;
    // Symmetrise away the solve round-off.
    return 0.5 * (Sigma + Sigma.transpose());
}

/// I = 1/2 log det(I + sigma_n^{-2} Sigma_f), via Cholesky of the shifted
/// matrix; falls back to an eigendecomposition near the PSD boundary.
inline double mutual_information(const Eigen::MatrixXd& Sigma_f, double sigma_n2) {
    if (Sigma_f.rows() != Sigma_f.cols())
        throw validation_error("mutual_information needs a square matrix");
    if (sigma_n2 <= 0.0) throw validation_error("sigma_n2 must be positive");
    const int d = int(Sigma_f.rows());
    double asym = (Sigma_f - Sigma_f.transpose()).cwiseAbs().maxCoeff();
    double scale = std::max(1.0, Sigma_f.cwiseAbs().maxCoeff());
    if (asym > 1e-8 * scale) throw validation_error("mutual_information input not symmetric");

    Eigen::MatrixXd M = Eigen::MatrixXd::Identity(d, d) + Sigma_f / sigma_n2;
    Eigen::LLT<Eigen::MatrixXd> llt(M);
    if (llt.info() == Eigen::Success) {
        double logdet = 0.0;
        const auto& L = llt.matrixLLT();
        for (int i = 0; i < d; ++i) logdet += std::log(L(i, i));
        return std::max(0.0, logdet); // 1/2 * 2 * sum log L_ii
    }
    // Cholesky refused: accept tiny negative eigenvalues, reject real ones.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Sigma_f);
    double lmin = es.eigenvalues().minCoeff();
    if (lmin < -1e-8 * scale)
        throw validation_error("mutual_information input not positive semi-definite");
    double info = 0.0;
    for (int i = 0; i < d; ++i)
        info += 0.5 * std::log1p(std::max(0.0, es.eigenvalues()(i)) / sigma_n2);
    return info;
}

} // namespace fieldscout
