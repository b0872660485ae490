#include <catch2/catch.hpp>

#include <Eigen/Eigenvalues>

#include "fieldscout/gp.hpp"

using namespace fieldscout;

namespace {

// Latent draw from GP(0, k) plus observation noise; test-only oracle input.
std::vector<double> sample_gp(const std::vector<Vec2>& X, const Hyperparams& theta,
                              KernelType kind, Rng& rng) {
    const int n = int(X.size());
    Eigen::MatrixXd K(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            K(i, j) = kernel_at(kind, dist(X[size_t(i)], X[size_t(j)]), theta);
    K.diagonal().array() += 1e-10;
    Eigen::LLT<Eigen::MatrixXd> llt(K);
    REQUIRE(llt.info() == Eigen::Success);
    Eigen::VectorXd z(n);
    for (int i = 0; i < n; ++i) z(i) = rng.normal();
    Eigen::VectorXd f = Eigen::MatrixXd(llt.matrixL()) * z;
    std::vector<double> y(static_cast<size_t>(n));
    double sn = std::sqrt(theta.sigma_n2);
    for (int i = 0; i < n; ++i) y[size_t(i)] = f(i) + sn * rng.normal();
    return y;
}

std::vector<Vec2> random_points(int n, Rng& rng) {
    std::vector<Vec2> X(static_cast<size_t>(n));
    for (auto& p : X) p = {rng.uniform(), rng.uniform()};
    return X;
}

} // namespace

TEST_CASE("Matern 3/2 kernel") {
    Hyperparams t{2.0, 0.1, 0.01};
    SECTION("zero lag returns the signal variance") {
        CHECK(kernel_m32({0.3, 0.4}, {0.3, 0.4}, t) == Approx(2.0));
    }
    SECTION("r = ell/sqrt(3) evaluates to sigma_f2 * 2/e") {
        double r = t.ell / std::sqrt(3.0);
        double k = kernel_m32({0.0, 0.0}, {r, 0.0}, t);
        CHECK(k == Approx(t.sigma_f2 * 2.0 * std::exp(-1.0)).epsilon(1e-12));
        CHECK(k == Approx(0.7357588823 * t.sigma_f2).epsilon(1e-9));
    }
    SECTION("monotone decreasing in distance, decaying to zero") {
        double prev = kernel_m32({0.0, 0.0}, {0.0, 0.0}, t);
        for (int i = 1; i <= 30; ++i) {
            double k = kernel_m32({0.0, 0.0}, {i * 0.05, 0.0}, t);
            CHECK(k < prev);
            CHECK(k > 0.0);
            prev = k;
        }
        CHECK(prev < 1e-6);
    }
    SECTION("symmetric in its arguments") {
        CHECK(kernel_m32({0.1, 0.9}, {0.7, 0.2}, t) == kernel_m32({0.7, 0.2}, {0.1, 0.9}, t));
    }
    SECTION("invalid hyperparameters are rejected") {
        CHECK_THROWS_AS(kernel_m32({0, 0}, {1, 1}, Hyperparams{-1.0, 0.1, 0.1}),
                        validation_error);
    }
}

TEST_CASE("build_train_cov") {
    Hyperparams t{1.5, 0.2, 0.02};
    SECTION("single point gives a 1x1 matrix with the jittered diagonal") {
        auto K = build_train_cov({{0.5, 0.5}}, t);
        REQUIRE(K.rows() == 1);
        CHECK(K(0, 0) == Approx(1.5 + 0.02 + 1e-6));
    }
    SECTION("diagonal carries sigma_f2 + sigma_n2 + jitter") {
        Rng rng(11);
        auto X = random_points(6, rng);
        auto K = build_train_cov(X, t);
        for (int i = 0; i < 6; ++i) CHECK(K(i, i) == Approx(1.5 + 0.02 + 1e-6));
        CHECK((K - K.transpose()).cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("two coincident points stay positive definite") {
        auto K = build_train_cov({{0.3, 0.3}, {0.3, 0.3}}, t);
        CHECK(K(0, 1) == Approx(t.sigma_f2));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
        CHECK(es.eigenvalues().minCoeff() > 0.0);
    }
}

TEST_CASE("fitted model factors the training covariance") {
    Hyperparams t{1.1, 0.12, 0.03};
    Rng rng(15);
    auto X = random_points(20, rng);
    std::vector<double> y;
    for (int i = 0; i < 20; ++i) y.push_back(rng.uniform());
    GPModel m = fit_gp(X, y, t);
    Eigen::MatrixXd K = build_train_cov(X, t, m.jitter);
    Eigen::MatrixXd rebuilt = m.chol * m.chol.transpose();
    double rel = (rebuilt - K).cwiseAbs().maxCoeff() / K.cwiseAbs().maxCoeff();
    CHECK(rel < 1e-8);
    // alpha solves K alpha = y
    Eigen::Map<Eigen::VectorXd> yv(y.data(), 20);
    CHECK((K * m.alpha - yv).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("log_posterior combines marginal likelihood and log-normal priors") {
    HyperPriors priors;
    SECTION("empty data reduces to the prior log-density") {
        Hyperparams t{1.0, 0.05, 0.05};
        CHECK(log_posterior(t, {}, {}) == Approx(priors.log_density(t)));
    }
    SECTION("prior modes maximise the prior term alone") {
        Hyperparams mode = priors.mode();
        CHECK(mode.sigma_f2 == Approx(std::exp(-0.25)));
        CHECK(mode.ell == Approx(0.05 * std::exp(-0.04)));
        CHECK(mode.sigma_n2 == Approx(std::exp(-3.09)));
        double at_mode = priors.log_density(mode);
        for (double scale : {0.8, 0.9, 1.1, 1.25}) {
            CHECK(priors.log_density({mode.sigma_f2 * scale, mode.ell, mode.sigma_n2}) < at_mode);
            CHECK(priors.log_density({mode.sigma_f2, mode.ell * scale, mode.sigma_n2}) < at_mode);
            CHECK(priors.log_density({mode.sigma_f2, mode.ell, mode.sigma_n2 * scale}) < at_mode);
        }
    }
    SECTION("matches a hand-rolled dense evaluation") {
        Rng rng(21);
        auto X = random_points(5, rng);
        std::vector<double> y;
        for (int i = 0; i < 5; ++i) y.push_back(rng.uniform(-1, 1));
        Hyperparams t{0.7, 0.12, 0.03};

        Eigen::MatrixXd K = build_train_cov(X, t);
        Eigen::Map<Eigen::VectorXd> yv(y.data(), 5);
        double direct = -0.5 * yv.dot(K.inverse() * yv) - 0.5 * std::log(K.determinant()) -
                        2.5 * std::log(2.0 * M_PI) + priors.log_density(t);
        CHECK(log_posterior(t, X, y) == Approx(direct).epsilon(1e-9));
    }
}

TEST_CASE("fit_map") {
    SECTION("recovers the lengthscale within a factor of two on synthetic data") {
        Hyperparams truth{0.8, 0.06, 0.04};
        Rng rng(31);
        auto X = random_points(150, rng);
        auto y = sample_gp(X, truth, KernelType::matern32, rng);
        auto fit = fit_map(X, y, HyperPriors{}.mode(), 3);
        CHECK_FALSE(fit.warning);
        CHECK(fit.theta.ell > truth.ell / 2.0);
        CHECK(fit.theta.ell < truth.ell * 2.0);
    }
    SECTION("never scores worse than the initial point") {
        Rng rng(32);
        auto X = random_points(20, rng);
        std::vector<double> y;
        for (int i = 0; i < 20; ++i) y.push_back(rng.uniform());
        Hyperparams init{0.6, 0.07, 0.04};
        auto fit = fit_map(X, y, init, 1);
        CHECK(fit.log_post >= log_posterior(init, X, y) - 1e-9);
    }
    SECTION("constant-zero targets shrink the signal variance below its prior mode") {
        Rng rng(33);
        auto X = random_points(60, rng);
        std::vector<double> y(60, 0.0);
        auto fit = fit_map(X, y, HyperPriors{}.mode(), 2);
        CHECK(fit.theta.sigma_f2 < HyperPriors{}.mode().sigma_f2);
    }
    SECTION("requires two observations") {
        CHECK_THROWS_AS(fit_map({{0.1, 0.1}}, {0.5}, Hyperparams{}, 1), validation_error);
    }
}

TEST_CASE("predict") {
    Hyperparams t{1.2, 0.15, 0.01};
    SECTION("no training data: prior mean 0 and variance sigma_f2") {
        GPModel m = fit_gp({}, {}, t);
        std::vector<double> mean, var;
        predict(m, {{0.2, 0.2}, {0.8, 0.9}}, mean, var);
        for (double mu : mean) CHECK(mu == 0.0);
        for (double v : var) CHECK(v == Approx(1.2));
    }
    SECTION("interpolates the observation as noise vanishes") {
        Hyperparams tiny{1.0, 0.1, 1e-10};
        GPModel m = fit_gp({{0.5, 0.5}}, {0.73}, tiny);
        std::vector<double> mean, var;
        predict(m, {{0.5, 0.5}}, mean, var);
        CHECK(mean[0] == Approx(0.73).margin(1e-5));
        CHECK(var[0] >= 0.0);
    }
    SECTION("single point posterior matches the closed form") {
        GPModel m = fit_gp({{0.3, 0.3}}, {0.9}, t);
        Vec2 q{0.35, 0.3};
        double kxq = kernel_m32({0.3, 0.3}, q, t);
        double kxx = t.sigma_f2 + t.sigma_n2 + m.jitter;
        std::vector<double> mean, var;
        predict(m, {q}, mean, var);
        CHECK(mean[0] == Approx(kxq * 0.9 / kxx).epsilon(1e-12));
        CHECK(var[0] == Approx(t.sigma_f2 - kxq * kxq / kxx).epsilon(1e-12));
    }
    SECTION("far queries revert to the prior") {
        Hyperparams local{1.0, 0.01, 0.01};
        GPModel m = fit_gp({{0.0, 0.0}}, {1.0}, local);
        std::vector<double> mean, var;
        predict(m, {{1.0, 1.0}}, mean, var);
        CHECK(std::abs(mean[0]) < 1e-10);
        CHECK(var[0] == Approx(local.sigma_f2).margin(1e-10));
    }
    SECTION("invariant under permutation of the training data") {
        Rng rng(41);
        auto X = random_points(12, rng);
        std::vector<double> y;
        for (int i = 0; i < 12; ++i) y.push_back(rng.uniform());
        auto Xp = X;
        auto yp = y;
        std::reverse(Xp.begin(), Xp.end());
        std::reverse(yp.begin(), yp.end());
        GPModel a = fit_gp(X, y, t), b = fit_gp(Xp, yp, t);
        std::vector<double> ma, va, mb, vb;
        auto Q = random_points(8, rng);
        predict(a, Q, ma, va);
        predict(b, Q, mb, vb);
        for (size_t i = 0; i < Q.size(); ++i) {
            CHECK(ma[i] == Approx(mb[i]).margin(1e-9));
            CHECK(va[i] == Approx(vb[i]).margin(1e-9));
        }
    }
    SECTION("adding an observation never increases predictive variance") {
        Rng rng(42);
        for (int trial = 0; trial < 20; ++trial) {
            auto X = random_points(8, rng);
            std::vector<double> y;
            for (int i = 0; i < 8; ++i) y.push_back(rng.uniform());
            GPModel small = fit_gp({X.begin(), X.end() - 1}, {y.begin(), y.end() - 1}, t);
            GPModel big = fit_gp(X, y, t);
            auto Q = random_points(5, rng);
            std::vector<double> m1, v1, m2, v2;
            predict(small, Q, m1, v1);
            predict(big, Q, m2, v2);
            for (size_t i = 0; i < Q.size(); ++i) CHECK(v2[i] <= v1[i] + 1e-7);
        }
    }
}

TEST_CASE("posterior_cov") {
    Hyperparams t{0.9, 0.1, 0.02};
    Rng rng(51);
    SECTION("1x1 case equals the predictive variance") {
        auto X = random_points(6, rng);
        std::vector<double> y;
        for (int i = 0; i < 6; ++i) y.push_back(rng.uniform());
        GPModel m = fit_gp(X, y, t);
        Vec2 q{0.42, 0.58};
        auto S = posterior_cov(m, {q});
        std::vector<double> mean, var;
        predict(m, {q}, mean, var);
        CHECK(S(0, 0) == Approx(var[0]).margin(1e-10));
    }
    SECTION("no training data yields the prior kernel matrix") {
        GPModel m = fit_gp({}, {}, t);
        auto P = random_points(4, rng);
        auto S = posterior_cov(m, P);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                CHECK(S(i, j) == Approx(kernel_m32(P[size_t(i)], P[size_t(j)], t)));
    }
    SECTION("positive semi-definite on random instances") {
        for (int trial = 0; trial < 10; ++trial) {
            auto X = random_points(10, rng);
            std::vector<double> y;
            for (int i = 0; i < 10; ++i) y.push_back(rng.uniform());
            GPModel m = fit_gp(X, y, t);
            auto P = random_points(6, rng);
            auto S = posterior_cov(m, P);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
            CHECK(es.eigenvalues().minCoeff() >= -1e-8);
            // diagonal agrees with predict
            std::vector<double> mean, var;
            predict(m, P, mean, var);
            for (int i = 0; i < 6; ++i) CHECK(S(i, i) == Approx(var[size_t(i)]).margin(1e-9));
        }
    }
}

TEST_CASE("mutual_information") {
    SECTION("zero covariance carries zero information") {
        CHECK(mutual_information(Eigen::MatrixXd::Zero(3, 3), 0.05) == 0.0);
    }
    SECTION("scalar case: Sigma = sigma_n2 gives ln(2)/2") {
        Eigen::MatrixXd S(1, 1);
        S(0, 0) = 0.07;
        CHECK(mutual_information(S, 0.07) == Approx(0.5 * std::log(2.0)).epsilon(1e-12));
        CHECK(mutual_information(S, 0.07) == Approx(0.34657).epsilon(1e-4));
    }
    SECTION("diagonal matrices sum per-coordinate terms") {
        Eigen::VectorXd d(4);
        d << 0.1, 0.02, 0.0, 0.5;
        Eigen::MatrixXd S = d.asDiagonal();
        double expected = 0.0;
        for (int i = 0; i < 4; ++i) expected += 0.5 * std::log(1.0 + d(i) / 0.04);
        CHECK(mutual_information(S, 0.04) == Approx(expected).epsilon(1e-12));
    }
    SECTION("monotone non-decreasing when appending a waypoint") {
        Rng rng(61);
        for (int trial = 0; trial < 30; ++trial) {
            int d = 2 + int(rng.uniform_int(5));
            Eigen::MatrixXd A(d, d);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) A(i, j) = rng.uniform(-1, 1);
            Eigen::MatrixXd S = A * A.transpose();
            double sub = mutual_information(S.topLeftCorner(d - 1, d - 1), 0.05);
            double full = mutual_information(S, 0.05);
            CHECK(full >= sub - 1e-9);
        }
    }
    SECTION("rejects non-PSD input beyond tolerance") {
        Eigen::MatrixXd S(2, 2);
        S << 1.0, 0.0, 0.0, -0.5;
        CHECK_THROWS_AS(mutual_information(S, 0.1), validation_error);
        Eigen::MatrixXd asym(2, 2);
        asym << 1.0, 0.5, -0.5, 1.0;
        CHECK_THROWS_AS(mutual_information(asym, 0.1), validation_error);
    }
}
