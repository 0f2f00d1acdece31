#include <doctest.h>

#include "helpers.hpp"
#include "linmix/linalg.hpp"
#include "linmix/posterior.hpp"
#include "oracles.hpp"

using namespace linmix;
using namespace testing_helpers;

namespace {

// Two states with basis kernels "go to 0" and "go to 1": theta = (p, 1 - p)
// yields the kernel (p, 1 - p) at every step.
std::shared_ptr<const FeatureMap> coin_features(int H = 1) {
    return structure({H, 2, 1, 2}, [](const Step&, StateId n) { return n == 0 ? vec({1, 0}) : vec({0, 1}); },
                     [](const Step&) { return 0.0; })
        ->features;
}

std::shared_ptr<const DiscreteSupport> support(std::shared_ptr<const FeatureMap> fm,
                                               std::vector<std::vector<Vec>> atoms) {
    return std::make_shared<const DiscreteSupport>(std::move(fm), std::move(atoms));
}

DiscretePosterior random_prior(Rng& rng, int S, int d, int atoms, int H = 2) {
    const auto env = make_simplex_mixture_env(S, 2, H, d, rng.engine()());
    return make_discrete_prior(env.structure()->features, atoms, rng.engine()(), 1.0);
}

}  // namespace

TEST_CASE("discrete update by Bayes rule") {
    const auto fm = coin_features();
    SUBCASE("likelihoods 0.8 / 0.2") {
        DiscretePosterior post(support(fm, {{vec({0.8, 0.2}), vec({0.2, 0.8})}}), {{0.5, 0.5}});
        post.update({0, 0, 0}, 0);
        CHECK(post.weights(0)[0] == doctest::Approx(0.8).epsilon(1e-15));
        CHECK(post.weights(0)[1] == doctest::Approx(0.2).epsilon(1e-15));
    }
    SUBCASE("single atom") {
        DiscretePosterior post = DiscretePosterior::uniform(support(fm, {{vec({0.3, 0.7})}}));
        post.update({0, 1, 0}, 1);
        CHECK(post.weights(0)[0] == 1.0);
    }
    SUBCASE("equal likelihoods") {
        // the middle state has probability 0.5 under every theta = (p, 1 - p)
        const auto fm2 = structure({1, 3, 1, 2},
                                   [](const Step&, StateId n) {
                                       return n == 0 ? vec({0.5, 0.0}) : n == 1 ? vec({0.5, 0.5}) : vec({0.0, 0.5});
                                   },
                                   [](const Step&) { return 0.0; })->features;
        DiscretePosterior post(support(fm2, {{vec({0.9, 0.1}), vec({0.2, 0.8})}}), {{0.3, 0.7}});
        post.update({0, 0, 0}, 1);
        CHECK(post.weights(0)[0] == doctest::Approx(0.3).epsilon(1e-15));
    }
    SUBCASE("impossible observation") {
        DiscretePosterior post(support(fm, {{vec({1, 0}), vec({1, 0})}}), {{0.5, 0.5}});
        CHECK_THROWS_WITH_AS(post.update({0, 0, 0}, 1), "observation impossible under prior support",
                             std::domain_error);
    }
    SUBCASE("invalid weights and improper atoms are rejected") {
        CHECK_THROWS(DiscretePosterior(support(fm, {{vec({0.5, 0.5})}}), {{0.9}}));
        CHECK_THROWS(support(fm, {{vec({1.5, -0.5})}}));
    }
}

TEST_CASE("weights stay a probability vector and other stages are untouched") {
    Rng rng(61);
    DiscretePosterior post = random_prior(rng, 4, 3, 6, 3);
    const auto stage2 = post.weights(2);
    for (int i = 0; i < 200; ++i) {
        const Step x{rng.index(2), rng.index(4), rng.index(2)};
        const auto pred = post.predictive(x);
        post.update(x, rng.categorical(pred));
        for (int h = 0; h < 3; ++h) {
            double total = 0.0;
            for (double w : post.weights(h)) {
                CHECK(w >= 0.0);
                total += w;
            }
            CHECK(std::abs(total - 1.0) <= 1e-12);
        }
    }
    CHECK(post.weights(2) == stage2);
}

TEST_CASE("posterior mean is a martingale under the predictive") {
    Rng rng(67);
    for (int trial = 0; trial < 20; ++trial) {
        DiscretePosterior post = random_prior(rng, 1 + rng.index(4), 1 + rng.index(4), 1 + rng.index(6));
        for (int k = 0; k < 3; ++k) {
            const Step x{rng.index(2), rng.index(post.features().dims().states), rng.index(2)};
            post.update(x, rng.categorical(post.predictive(x)));
        }
        const Step x{0, 0, 1};
        const auto pred = post.predictive(x);
        Vec avg = Vec::Zero(post.features().dims().dim);
        for (int n = 0; n < static_cast<int>(pred.size()); ++n)
            if (pred[n] > 0) avg += pred[n] * post.updated(x, n).mean(0);
        CHECK((avg - post.mean(0)).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("covariance examples and the norm-bound fact") {
    const auto fm = coin_features();
    CHECK(DiscretePosterior::uniform(support(fm, {{vec({0.4, 0.6})}})).covariance(0).isZero());
    // atoms (0, 1) and (1, 0): two-point variance 0.25 per coordinate
    const Mat g = DiscretePosterior::uniform(support(fm, {{vec({0, 1}), vec({1, 0})}})).covariance(0);
    CHECK(g(0, 0) == doctest::Approx(0.25));
    CHECK(g(1, 1) == doctest::Approx(0.25));
    CHECK(g(0, 1) == doctest::Approx(-0.25));

    Rng rng(71);
    for (int trial = 0; trial < 30; ++trial) {
        const auto post = random_prior(rng, 3, 1 + rng.index(4), 1 + rng.index(8));
        const double bound = post.features().simplex_scale();
        for (int h = 0; h < 2; ++h) {
            const Mat gamma = post.covariance(h);
            CHECK(gamma.trace() <= bound * bound + 1e-12);
            CHECK(min_eigenvalue(gamma) >= -1e-10);
            // second-moment form of the same matrix
            Mat second = Mat::Zero(gamma.rows(), gamma.cols());
            Vec mean = Vec::Zero(gamma.rows());
            for (int i = 0; i < post.support().atom_count(h); ++i) {
                const Vec& a = post.support().atom(h, i);
                second += post.weights(h)[i] * a * a.transpose();
                mean += post.weights(h)[i] * a;
            }
            CHECK((second - mean * mean.transpose() - gamma).cwiseAbs().maxCoeff() <= 1e-12);
        }
    }
}

TEST_CASE("sampling") {
    Rng rng(73);
    const auto fm = coin_features();
    CHECK(DiscretePosterior::uniform(support(fm, {{vec({0.4, 0.6})}})).sample(rng).theta[0] == vec({0.4, 0.6}));
    const DiscretePosterior first(support(fm, {{vec({0.1, 0.9}), vec({0.9, 0.1})}}), {{1.0, 0.0}});
    for (int i = 0; i < 100; ++i) CHECK(first.sample(rng).theta[0] == vec({0.1, 0.9}));

    const DiscretePosterior four = DiscretePosterior::uniform(
        support(fm, {{vec({0.1, 0.9}), vec({0.3, 0.7}), vec({0.6, 0.4}), vec({0.8, 0.2})}}));
    std::vector<double> counts(4, 0.0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const Vec t = four.sample(rng).theta[0];
        for (int k = 0; k < 4; ++k)
            if (t == four.support().atom(0, k)) counts[k] += 1.0;
    }
    const double se = std::sqrt(0.25 * 0.75 / n);
    for (double c : counts) CHECK(std::abs(c / n - 0.25) <= 3.0 * se);
}

TEST_CASE("posterior predictive") {
    const auto fm = coin_features();
    const auto one = DiscretePosterior::uniform(support(fm, {{vec({0.35, 0.65})}}));
    CHECK(one.predictive({0, 0, 0})[0] == doctest::Approx(0.35));
    const auto two = DiscretePosterior::uniform(support(fm, {{vec({1, 0}), vec({0, 1})}}));
    CHECK(two.predictive({0, 1, 0})[0] == 0.5);
    CHECK(two.predictive({0, 1, 0})[1] == 0.5);

    Rng rng(79);
    const auto post = random_prior(rng, 3, 2, 3);
    const Step x{1, 2, 0};
    const auto pred = post.predictive(x);
    double total = 0.0;
    for (double p : pred) total += p;
    CHECK(std::abs(total - 1.0) <= 1e-12);
    std::vector<double> counts(3, 0.0);
    const int n = 100000;
    // sample-then-transition, using the support's own kernels
    for (int i = 0; i < n; ++i) {
        const auto weights = post.weights(1);
        const int atom = oracle::draw(weights, rng.uniform());
        counts[oracle::draw(post.support().kernel(atom, x), rng.uniform())] += 1.0;
    }
    for (int k = 0; k < 3; ++k) {
        const double se = std::sqrt(pred[k] * (1 - pred[k]) / n);
        CHECK(std::abs(counts[k] / n - pred[k]) <= 3.0 * se + 1e-12);
    }
}

TEST_CASE("expected value variance") {
    const auto fm = coin_features();
    const auto one = DiscretePosterior::uniform(support(fm, {{vec({0.5, 0.5})}}));
    const auto c = one.expected_value_variance({0, 0, 0}, std::vector<double>{2.0, 2.0}, 1.0);
    CHECK(c.expected == 0.0);
    CHECK(c.sigma_bar_sq == 1.0);
    CHECK(one.expected_value_variance({0, 0, 0}, std::vector<double>{0.0, 2.0}, 1.0).expected ==
          doctest::Approx(1.0));
    const auto det = DiscretePosterior::uniform(support(fm, {{vec({1, 0}), vec({0, 1})}}));
    CHECK(det.expected_value_variance({0, 0, 0}, std::vector<double>{0.0, 5.0}, 3.0).expected == 0.0);
    CHECK(sigma_min(SigmaMinRule::horizon, 3, 4) == 3.0);
    CHECK(sigma_min(SigmaMinRule::horizon_over_sqrt_d, 4, 4) == 2.0);
}

TEST_CASE("discrete prior scale controls the covariance") {
    const auto env = make_simplex_mixture_env(4, 2, 3, 3, 9);
    const auto fm = env.structure()->features;
    CHECK(make_discrete_prior(fm, 8, 5, 1e-9).covariance(0).trace() <= 1e-12);
    CHECK(make_discrete_prior(fm, 1, 5, 1.0).covariance(1).isZero());
    double previous = -1.0;
    for (double c : {0.01, 0.1, 0.3, 0.7, 1.0}) {
        const double t = make_discrete_prior(fm, 8, 5, c).covariance(2).trace();
        CHECK(t >= previous);
        previous = t;
    }
    CHECK(make_discrete_prior(fm, 8, 5, 1.0).covariance(0).trace() >
          make_discrete_prior(fm, 8, 5, 0.1).covariance(0).trace());
    CHECK_THROWS(make_discrete_prior(fm, 8, 5, 0.0));
    CHECK_THROWS(make_discrete_prior(fm, 8, 5, 1.5));
}

TEST_CASE("gaussian update") {
    const auto fm = structure({1, 1, 1, 1}, [](const Step&, StateId) { return vec({1.0}); }, [](const Step&) { return 0.0; })->features;
    SUBCASE("conjugate 1-d formula") {
        GaussianPosterior g(fm, {vec({0.0})}, {Mat::Identity(1, 1)});
        g.update(ValueTargetRecord{0, 0, 0, 0, vec({1.0}), 1.0}, 1.0);
        CHECK(g.mean(0)(0) == doctest::Approx(0.5));
        CHECK(g.covariance(0)(0, 0) == doctest::Approx(0.5));
    }
    SUBCASE("zero feature leaves the state unchanged") {
        GaussianPosterior g(fm, {vec({0.3})}, {Mat::Constant(1, 1, 2.0)});
        g.update(ValueTargetRecord{0, 0, 0, 0, vec({0.0}), 5.0}, 1.0);
        CHECK(g.mean(0)(0) == 0.3);
        CHECK(g.covariance(0)(0, 0) == 2.0);
    }
    SUBCASE("non-finite input") {
        GaussianPosterior g(fm, {vec({0.0})}, {Mat::Identity(1, 1)});
        CHECK_THROWS(g.update(ValueTargetRecord{0, 0, 0, 0, vec({NAN}), 1.0}, 1.0));
        CHECK_THROWS(g.update(ValueTargetRecord{0, 0, 0, 0, vec({1.0}), INFINITY}, 1.0));
    }
}

TEST_CASE("gaussian sequential updates equal the batch posterior; precision grows") {
    Rng rng(83);
    const int d = 3;
    const auto fm = make_simplex_mixture_env(2, 1, 1, d, 3).structure()->features;
    for (int trial = 0; trial < 20; ++trial) {
        const Mat prior_cov = oracle::random_psd(rng, d, d) + 0.1 * Mat::Identity(d, d);
        const Vec prior_mean = Vec::NullaryExpr(d, [&] { return rng.normal(); });
        GaussianPosterior g(fm, {prior_mean}, {prior_cov});
        Mat precision = prior_cov.inverse();
        Vec info = precision * prior_mean;
        Mat last_precision = precision;
        for (int k = 0; k < 4; ++k) {
            const Vec x = Vec::NullaryExpr(d, [&] { return rng.normal(); });
            const double y = rng.normal(), s2 = rng.uniform(0.5, 4.0);
            g.update(ValueTargetRecord{0, 0, 0, 0, x, y}, s2);
            precision += x * x.transpose() / s2;
            info += x * y / s2;
            const Mat now = g.covariance(0).inverse();
            CHECK(min_eigenvalue(now - last_precision) >= -1e-8 * now.norm());
            last_precision = now;
        }
        const Mat cov = precision.inverse();
        CHECK((g.covariance(0) - cov).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK((g.mean(0) - cov * info).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("moment matching, sampling moments and snapshots") {
    Rng rng(89);
    const auto disc = random_prior(rng, 3, 3, 5);
    const auto gauss = GaussianPosterior::moment_matched(disc);
    for (int h = 0; h < 2; ++h) {
        CHECK((gauss.mean(h) - disc.mean(h)).norm() <= 1e-14);
        CHECK((gauss.covariance(h) - disc.covariance(h)).norm() <= 1e-14);
    }
    Vec acc = Vec::Zero(3);
    const int n = 20000;
    for (int i = 0; i < n; ++i) acc += gauss.sample(rng).theta[1];
    acc /= n;
    for (int k = 0; k < 3; ++k) {
        const double se = std::sqrt(disc.covariance(1)(k, k) / n);
        CHECK(std::abs(acc(k) - disc.mean(1)(k)) <= 4.0 * se + 1e-12);
    }
    for (const Posterior& p : {Posterior(disc), Posterior(gauss)}) {
        const auto back = posterior_from_json(posterior_to_json(p), disc.support().feature_ptr());
        CHECK(posterior_to_json(back).dump() == posterior_to_json(p).dump());
        CHECK((covariance(back, 1) - covariance(p, 1)).norm() == 0.0);
    }
}
