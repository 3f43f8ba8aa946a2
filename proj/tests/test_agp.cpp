#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "doaiq/agp.hpp"
#include "doaiq/rng.hpp"

using doaiq::AgpFitOptions;
using doaiq::AgpModel;
using doaiq::AgpParams;
using doaiq::MixedInput;
using doaiq::Rng;

namespace {

struct Problem {
    Eigen::MatrixXd X;
    Eigen::MatrixXi Z;
    Eigen::VectorXd y;
    Eigen::VectorXd rho, theta;
    double eta = 0.0;
};

Problem random_problem(std::size_t n, std::size_t p, std::size_t q, Rng& rng,
                       double eta = 1e-4) {
    Problem pr;
    pr.X.resize(n, p);
    pr.Z.resize(n, q);
    pr.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) pr.X(i, j) = rng.uniform01();
        for (std::size_t h = 0; h < q; ++h) pr.Z(i, h) = rng.uniform01() < 0.5 ? 0 : 1;
        pr.y(i) = rng.normal();
    }
    pr.rho.resize(q);
    pr.theta.resize(q);
    for (std::size_t h = 0; h < q; ++h) {
        pr.rho(h) = rng.uniform(0.1, 0.9);
        pr.theta(h) = std::exp(rng.uniform(std::log(0.2), std::log(5.0)));
    }
    pr.eta = eta;
    return pr;
}

MixedInput row_input(const Problem& pr, std::size_t i) {
    MixedInput w;
    for (Eigen::Index j = 0; j < pr.X.cols(); ++j) w.x_cont.push_back(pr.X(i, j));
    for (Eigen::Index h = 0; h < pr.Z.cols(); ++h) w.z_bin.push_back(pr.Z(i, h));
    return w;
}

AgpParams params_of(const Problem& pr, double tau2 = 1.0) {
    return {pr.rho, pr.theta, pr.eta, tau2};
}

// per-entry Schur-product oracle for the covariance matrix
Eigen::MatrixXd oracle_covariance(const Problem& pr, double tau2) {
    const Eigen::Index n = pr.X.rows();
    Eigen::MatrixXd total = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index h = 0; h < pr.Z.cols(); ++h) {
        Eigen::MatrixXd C(n, n), B(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) {
                C(i, j) = std::exp(-(pr.X.row(i) - pr.X.row(j)).squaredNorm() / pr.theta(h)) +
                          (i == j ? pr.eta : 0.0);
                B(i, j) = pr.Z(i, h) == pr.Z(j, h) ? 1.0 : pr.rho(h);
            }
        total += C.cwiseProduct(B);
    }
    return tau2 * total;
}

double oracle_nll(const Problem& pr) {
    const Eigen::MatrixXd R = oracle_covariance(pr, 1.0);
    const Eigen::MatrixXd Rinv = R.inverse();  // dense inverse, not the Cholesky path
    const double quad = pr.y.dot(Rinv * pr.y);
    return std::log(R.determinant()) + static_cast<double>(pr.X.rows()) * std::log(quad);
}

}  // namespace

TEST(EncodeCategorical, ReferenceCodingMatchesConvention) {
    const std::vector<std::string> two = {"MNIST", "FashionMNIST"};
    EXPECT_EQ(doaiq::encode_categorical("MNIST", two), (std::vector<int>{0}));
    EXPECT_EQ(doaiq::encode_categorical("FashionMNIST", two), (std::vector<int>{1}));

    const std::vector<std::string> four = {"a", "b", "c", "d"};
    EXPECT_EQ(doaiq::encode_categorical("c", four), (std::vector<int>{0, 1, 0}));
    EXPECT_THROW(doaiq::encode_categorical("nope", two), doaiq::ParameterError);
}

TEST(Covariance, HandValues) {
    AgpParams p1;
    p1.rho = Eigen::VectorXd::Constant(1, 0.4);
    p1.theta = Eigen::VectorXd::Constant(1, 2.0);
    p1.eta = 0.25;
    p1.tau2 = 3.0;
    const MixedInput w0{{0.3, 0.7}, {0}};
    EXPECT_DOUBLE_EQ(doaiq::covariance(w0, w0, p1, true), 3.0 * (1.0 + 0.25));

    const MixedInput w1{{0.3, 0.7}, {1}};
    EXPECT_DOUBLE_EQ(doaiq::covariance(w0, w1, p1, false), 3.0 * 0.4);

    AgpParams p2;
    p2.rho = Eigen::Vector2d(0.3, 0.7);
    p2.theta = Eigen::Vector2d(1.0, 2.0);
    p2.eta = 0.0;
    p2.tau2 = 1.0;
    const MixedInput a{{0.0, 0.0}, {0, 0}};
    const MixedInput b{{1.0, 0.0}, {0, 1}};  // ||dx||^2 = 1, equal in h=1, unequal in h=2
    const double expected = std::exp(-1.0) * 1.0 + std::exp(-0.5) * 0.7;
    EXPECT_NEAR(doaiq::covariance(a, b, p2, false), expected, 1e-15);

    const MixedInput bad{{1.0}, {0, 1}};
    EXPECT_THROW(doaiq::covariance(a, bad, p2, false), doaiq::ParameterError);
}

TEST(CovarianceMatrix, SinglePointAndOracleAgreement) {
    Rng rng(1);
    {
        Problem pr = random_problem(1, 3, 2, rng, 0.5);
        const Eigen::MatrixXd S = doaiq::covariance_matrix(pr.X, pr.Z, params_of(pr, 2.0));
        ASSERT_EQ(S.rows(), 1);
        EXPECT_NEAR(S(0, 0), 2.0 * 2.0 * 1.5, 1e-14);  // tau2 * q * (1+eta)
    }
    for (int rep = 0; rep < 20; ++rep) {
        Problem pr = random_problem(5, 2, 1 + rep % 3, rng);
        const Eigen::MatrixXd S = doaiq::covariance_matrix(pr.X, pr.Z, params_of(pr, 1.7));
        const Eigen::MatrixXd O = oracle_covariance(pr, 1.7);
        EXPECT_LT((S - O).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((S - S.transpose()).cwiseAbs().maxCoeff(), 1e-14);
    }
}

TEST(CovarianceMatrix, PositiveDefiniteOnRandomDraws) {
    Rng rng(2);
    for (int rep = 0; rep < 100; ++rep) {
        Problem pr = random_problem(8, 3, 2, rng, 1e-6);
        const Eigen::MatrixXd R = doaiq::covariance_matrix(pr.X, pr.Z, params_of(pr));
        Eigen::LLT<Eigen::MatrixXd> llt(R);
        EXPECT_EQ(llt.info(), Eigen::Success);
    }
}

TEST(CovarianceMatrix, SingularMatrixReportsPivot) {
    // duplicate inputs with a zero nugget make the covariance exactly singular
    Eigen::MatrixXd X(2, 1);
    X << 0.5, 0.5;
    Eigen::MatrixXi Z(2, 1);
    Z << 0, 0;
    Eigen::VectorXd y(2);
    y << 1.0, 2.0;
    const Eigen::VectorXd rho = Eigen::VectorXd::Constant(1, 0.5);
    const Eigen::VectorXd theta = Eigen::VectorXd::Constant(1, 1.0);
    try {
        doaiq::profile_tau2(X, Z, y, rho, theta, 0.0);
        FAIL() << "expected ConditioningError";
    } catch (const doaiq::ConditioningError& e) {
        EXPECT_NE(std::string(e.what()).find("pivot"), std::string::npos) << e.what();
    }
}

TEST(ProfileTau2, ScalarCasesAndDenseOracle) {
    Rng rng(3);
    {
        Eigen::MatrixXd X(1, 1);
        X << 0.5;
        Eigen::MatrixXi Z(1, 1);
        Z << 0;
        Eigen::VectorXd y(1);
        y << 2.0;
        const Eigen::VectorXd rho = Eigen::VectorXd::Constant(1, 0.5);
        const Eigen::VectorXd theta = Eigen::VectorXd::Constant(1, 1.0);
        EXPECT_DOUBLE_EQ(doaiq::profile_tau2(X, Z, y, rho, theta, 0.0), 4.0);
        y << 0.0;
        EXPECT_DOUBLE_EQ(doaiq::profile_tau2(X, Z, y, rho, theta, 0.0), 0.0);
    }
    for (int rep = 0; rep < 20; ++rep) {
        Problem pr = random_problem(6, 2, 2, rng);
        const Eigen::MatrixXd R = oracle_covariance(pr, 1.0);
        const double expected = pr.y.dot(R.inverse() * pr.y) / 6.0;
        const double got = doaiq::profile_tau2(pr.X, pr.Z, pr.y, pr.rho, pr.theta, pr.eta);
        EXPECT_NEAR(got, expected, 1e-10 * std::abs(expected));
        EXPECT_GT(got, 0.0);
    }
}

TEST(NegLogLikelihood, ScalarCaseScalingAndOracle) {
    Rng rng(4);
    {
        Eigen::MatrixXd X(1, 1);
        X << 0.2;
        Eigen::MatrixXi Z(1, 1);
        Z << 1;
        Eigen::VectorXd y(1);
        y << 3.0;
        const Eigen::VectorXd rho = Eigen::VectorXd::Constant(1, 0.5);
        const Eigen::VectorXd theta = Eigen::VectorXd::Constant(1, 1.0);
        EXPECT_NEAR(doaiq::neg_log_likelihood(X, Z, y, rho, theta, 0.0), std::log(9.0), 1e-14);
    }
    for (int rep = 0; rep < 20; ++rep) {
        Problem pr = random_problem(6, 3, 1 + rep % 2, rng);
        const double got = doaiq::neg_log_likelihood(pr.X, pr.Z, pr.y, pr.rho, pr.theta, pr.eta);
        const double expected = oracle_nll(pr);
        EXPECT_NEAR(got, expected, 1e-9 * std::max(1.0, std::abs(expected)));

        // rescaling the responses shifts the objective by exactly 2N log c
        const Eigen::VectorXd y10 = 10.0 * pr.y;
        const double shifted =
            doaiq::neg_log_likelihood(pr.X, pr.Z, y10, pr.rho, pr.theta, pr.eta);
        EXPECT_NEAR(shifted - got, 2.0 * 6.0 * std::log(10.0), 1e-8);
    }
}

TEST(NllGradient, MatchesCentralFiniteDifferences) {
    Rng rng(5);
    const double h = 1e-5;
    for (int rep = 0; rep < 12; ++rep) {
        Problem pr = random_problem(10, 3, 2, rng, 1e-3);
        const Eigen::VectorXd grad =
            doaiq::nll_gradient(pr.X, pr.Z, pr.y, pr.rho, pr.theta, pr.eta);
        const Eigen::Index q = pr.Z.cols();
        ASSERT_EQ(grad.size(), 2 * q + 1);

        // finite differences in log-parameter space, chained back
        auto nll_at = [&](const Eigen::VectorXd& rho, const Eigen::VectorXd& theta, double eta) {
            return doaiq::neg_log_likelihood(pr.X, pr.Z, pr.y, rho, theta, eta);
        };
        for (Eigen::Index k = 0; k < grad.size(); ++k) {
            Eigen::VectorXd rp = pr.rho, rm = pr.rho, tp = pr.theta, tm = pr.theta;
            double ep = pr.eta, em = pr.eta, base = 0.0;
            if (k < q) {
                base = pr.rho(k);
                rp(k) = base * std::exp(h);
                rm(k) = base * std::exp(-h);
            } else if (k < 2 * q) {
                base = pr.theta(k - q);
                tp(k - q) = base * std::exp(h);
                tm(k - q) = base * std::exp(-h);
            } else {
                base = pr.eta;
                ep = base * std::exp(h);
                em = base * std::exp(-h);
            }
            const double fd = (nll_at(rp, tp, ep) - nll_at(rm, tm, em)) / (2.0 * h);
            const double analytic = grad(k) * base;  // d/d log p = p * d/dp
            EXPECT_NEAR(analytic, fd, 1e-4 * std::max({std::abs(analytic), std::abs(fd), 1e-8}))
                << "component " << k << " rep " << rep;
        }
    }
}

TEST(NllGradient, SinglePointRhoGradientIsZero) {
    Eigen::MatrixXd X(1, 2);
    X << 0.1, 0.9;
    Eigen::MatrixXi Z(1, 2);
    Z << 0, 1;
    Eigen::VectorXd y(1);
    y << 1.5;
    const Eigen::VectorXd rho = Eigen::VectorXd::Constant(2, 0.5);
    const Eigen::VectorXd theta = Eigen::VectorXd::Constant(2, 1.0);
    const Eigen::VectorXd grad = doaiq::nll_gradient(X, Z, y, rho, theta, 0.1);
    EXPECT_DOUBLE_EQ(grad(0), 0.0);
    EXPECT_DOUBLE_EQ(grad(1), 0.0);
}

TEST(NllGradient, LogDetEtaDerivativeAtNearIdentity) {
    // points far apart in x: the unit covariance approaches (1+eta) I, and the
    // log-det part of the eta-derivative approaches N (q = 1, eta = 0)
    const int n = 3;
    Eigen::MatrixXd X(n, 1);
    X << 0.0, 1e3, 2e3;
    Eigen::MatrixXi Z = Eigen::MatrixXi::Zero(n, 1);
    const Eigen::VectorXd rho = Eigen::VectorXd::Constant(1, 0.5);
    const Eigen::VectorXd theta = Eigen::VectorXd::Constant(1, 1.0);

    const double h = 1e-7;
    auto logdet = [&](double eta) {
        doaiq::AgpParams p{rho, theta, eta, 1.0};
        const Eigen::MatrixXd R = doaiq::covariance_matrix(X, Z, p);
        return std::log(R.determinant());
    };
    EXPECT_NEAR((logdet(h) - logdet(0.0)) / h, static_cast<double>(n), 1e-5);
}

TEST(AgpFit, MinimizerDominatesGeneratingParameters) {
    Rng rng(6);
    Problem pr = random_problem(40, 2, 1, rng, 1e-3);
    // draw the responses from the model itself
    const Eigen::MatrixXd S = oracle_covariance(pr, 1.0);
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    Eigen::VectorXd zdraw(40);
    for (int i = 0; i < 40; ++i) zdraw(i) = rng.normal();
    pr.y = llt.matrixL() * zdraw;

    AgpFitOptions opts;
    opts.seed = 9;
    opts.restarts = 3;
    const AgpModel model = doaiq::agp_fit(pr.X, pr.Z, pr.y, opts);
    const double nll_at_truth =
        doaiq::neg_log_likelihood(pr.X, pr.Z, pr.y.array() - pr.y.mean(), pr.rho, pr.theta,
                                  pr.eta);
    EXPECT_LE(model.report.final_nll, nll_at_truth + 1e-9);
    EXPECT_GT(model.params.tau2, 0.0);

    // rebuilt covariance matches the cached factorization
    doaiq::agp_detail::LikelihoodCache cache(model.X, model.Z);
    const Eigen::MatrixXd R =
        cache.unit_covariance(model.params.rho, model.params.theta, model.params.eta);
    const Eigen::MatrixXd LLt = model.L * model.L.transpose();
    EXPECT_LT((R - LLt).cwiseAbs().maxCoeff() / R.cwiseAbs().maxCoeff(), 1e-8);
}

TEST(AgpFit, MultiStartNeverWorseThanSingleStart) {
    Rng rng(7);
    Problem pr = random_problem(25, 2, 1, rng, 1e-3);
    AgpFitOptions multi;
    multi.seed = 4;
    multi.restarts = 5;
    const double multi_nll = doaiq::agp_fit(pr.X, pr.Z, pr.y, multi).report.final_nll;
    for (int r = 1; r <= 5; ++r) {
        AgpFitOptions single = multi;
        single.restarts = r;
        const double nll = doaiq::agp_fit(pr.X, pr.Z, pr.y, single).report.final_nll;
        EXPECT_LE(multi_nll, nll + 1e-9);
    }
}

TEST(AgpFit, ConstantResponsesHandledFlat) {
    Rng rng(8);
    Problem pr = random_problem(10, 2, 1, rng);
    pr.y.setConstant(0.8);
    const AgpModel model = doaiq::agp_fit(pr.X, pr.Z, pr.y, AgpFitOptions{});
    EXPECT_TRUE(model.report.degenerate);
    const auto pd = doaiq::agp_predict(model, row_input(pr, 0));
    EXPECT_NEAR(pd.mean, 0.8, 1e-12);
    EXPECT_NEAR(pd.variance, 0.0, 1e-12);
}

TEST(AgpFit, ArgminInvariantUnderResponseScaling) {
    Rng rng(9);
    Problem pr = random_problem(15, 2, 1, rng, 1e-3);
    AgpFitOptions opts;
    opts.seed = 12;
    opts.restarts = 2;
    const AgpModel a = doaiq::agp_fit(pr.X, pr.Z, pr.y, opts);
    const AgpModel b = doaiq::agp_fit(pr.X, pr.Z, (5.0 * pr.y).eval(), opts);
    EXPECT_NEAR(a.params.theta(0), b.params.theta(0), 1e-5 * a.params.theta(0));
    EXPECT_NEAR(a.params.rho(0), b.params.rho(0), 1e-5);
    EXPECT_NEAR(b.params.tau2, 25.0 * a.params.tau2, 1e-5 * b.params.tau2);
}

TEST(AgpPredict, InterpolatesWithZeroNugget) {
    Rng rng(10);
    Problem pr = random_problem(20, 3, 1, rng);
    // smooth noiseless surface
    for (int i = 0; i < 20; ++i)
        pr.y(i) = std::sin(3.0 * pr.X(i, 0)) + pr.X(i, 1) * pr.X(i, 1) +
                  0.3 * static_cast<double>(pr.Z(i, 0));
    AgpFitOptions opts;
    opts.fixed_eta = 0.0;
    opts.seed = 2;
    opts.restarts = 3;
    const AgpModel model = doaiq::agp_fit(pr.X, pr.Z, pr.y, opts);
    EXPECT_DOUBLE_EQ(model.params.eta, 0.0);
    for (int i = 0; i < 20; ++i) {
        const auto pd = doaiq::agp_predict(model, row_input(pr, i));
        EXPECT_NEAR(pd.mean, pr.y(i), 1e-8);
        EXPECT_LE(pd.variance, 1e-8 * model.params.tau2);
    }
}

TEST(AgpPredict, FarPointRevertsToPriorAndVarianceIsBounded) {
    Rng rng(11);
    Problem pr = random_problem(15, 2, 1, rng, 1e-3);
    AgpFitOptions opts;
    opts.seed = 3;
    opts.restarts = 2;
    const AgpModel model = doaiq::agp_fit(pr.X, pr.Z, pr.y, opts);

    MixedInput far;
    far.x_cont = {1e8, -1e8};
    far.z_bin = {0};
    const auto pd = doaiq::agp_predict(model, far);
    EXPECT_NEAR(pd.mean, model.y_mean, 1e-9);
    const double prior = model.params.tau2 * 1.0 * (1.0 + model.params.eta);
    EXPECT_NEAR(pd.variance, prior, 1e-9 * prior);

    for (int rep = 0; rep < 30; ++rep) {
        MixedInput w;
        w.x_cont = {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
        w.z_bin = {rng.uniform01() < 0.5 ? 0 : 1};
        const auto q = doaiq::agp_predict(model, w);
        EXPECT_LE(q.variance, prior + 1e-8);
        EXPECT_GE(q.variance, 0.0);
    }
    MixedInput bad;
    bad.x_cont = {0.0};
    bad.z_bin = {0};
    EXPECT_THROW(doaiq::agp_predict(model, bad), doaiq::ParameterError);
}

TEST(AgpPredict, MatchesDenseAlgebraOracle) {
    Rng rng(12);
    for (int rep = 0; rep < 25; ++rep) {
        Problem pr = random_problem(3, 2, 1, rng, 1e-2);
        AgpFitOptions opts;
        opts.seed = 1;
        opts.restarts = 1;
        opts.max_iters = 5;  // any valid parameter point works for this check
        const AgpModel model = doaiq::agp_fit(pr.X, pr.Z, pr.y, opts);

        MixedInput w;
        w.x_cont = {rng.uniform01(), rng.uniform01()};
        w.z_bin = {rng.uniform01() < 0.5 ? 0 : 1};

        Problem at = pr;
        at.rho = model.params.rho;
        at.theta = model.params.theta;
        at.eta = model.params.eta;
        const Eigen::MatrixXd S = oracle_covariance(at, model.params.tau2);
        Eigen::VectorXd k(3);
        for (int i = 0; i < 3; ++i)
            k(i) = doaiq::covariance(w, row_input(pr, i), model.params, false);
        const Eigen::VectorXd yc = pr.y.array() - pr.y.mean();
        const Eigen::MatrixXd Sinv = S.inverse();
        const double mean_oracle = k.dot(Sinv * yc) + pr.y.mean();
        const double var_oracle =
            model.params.tau2 * (1.0 + model.params.eta) - k.dot(Sinv * k);

        const auto pd = doaiq::agp_predict(model, w);
        EXPECT_NEAR(pd.mean, mean_oracle, 1e-10 * std::max(1.0, std::abs(mean_oracle)));
        EXPECT_NEAR(pd.variance, var_oracle, 1e-10 * std::max(1.0, var_oracle));
    }
}

TEST(BuildEncoder, FirstObservedLevelIsReference) {
    doaiq::CsvTable t;
    t.header = {"run_id", "rep", "z4", "z1", "x1", "x2", "y1"};
    t.rows = {{"1", "1", "MNIST", "2.0", "0.4", "0.6", "0.9"},
              {"2", "1", "FashionMNIST", "3.0", "0.5", "0.5", "0.8"},
              {"3", "1", "MNIST", "4.0", "0.6", "0.4", "0.7"}};
    const doaiq::CovariateEncoder enc = doaiq::build_encoder(t);
    ASSERT_EQ(enc.levels.size(), 2u);
    EXPECT_EQ(enc.levels[0], "MNIST");  // not alphabetical
    EXPECT_EQ(enc.encode_level("MNIST"), (std::vector<int>{0}));
    EXPECT_EQ(enc.encode_level("FashionMNIST"), (std::vector<int>{1}));
    EXPECT_EQ(enc.n_simplex, 2u);
    ASSERT_EQ(enc.cont_cols.size(), 3u);
    EXPECT_EQ(enc.cont_cols[0].name, "x1");
    EXPECT_EQ(enc.cont_cols[2].name, "z1");
    EXPECT_TRUE(enc.cont_cols[2].log_scale);
}

TEST(AgpModelIo, SaveLoadRoundTrip) {
    Rng rng(13);
    Problem pr = random_problem(12, 2, 1, rng, 1e-3);
    AgpFitOptions opts;
    opts.seed = 5;
    opts.restarts = 2;
    const AgpModel model = doaiq::agp_fit(pr.X, pr.Z, pr.y, opts);

    const std::string path = "agp_roundtrip_test.model";
    doaiq::save_agp_model(path, model);
    const AgpModel loaded = doaiq::load_agp_model(path);
    std::remove(path.c_str());

    EXPECT_EQ(loaded.params.rho(0), model.params.rho(0));
    EXPECT_EQ(loaded.params.theta(0), model.params.theta(0));
    EXPECT_EQ(loaded.params.eta, model.params.eta);
    EXPECT_EQ(loaded.params.tau2, model.params.tau2);
    EXPECT_EQ(loaded.y_mean, model.y_mean);
    for (int rep = 0; rep < 10; ++rep) {
        MixedInput w;
        w.x_cont = {rng.uniform01(), rng.uniform01()};
        w.z_bin = {rng.uniform01() < 0.5 ? 0 : 1};
        const auto a = doaiq::agp_predict(model, w);
        const auto b = doaiq::agp_predict(loaded, w);
        EXPECT_NEAR(a.mean, b.mean, 1e-12);
        EXPECT_NEAR(a.variance, b.variance, 1e-12);
    }
}
