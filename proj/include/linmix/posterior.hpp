#pragma once

#include <memory>
#include <span>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "linmix/model.hpp"
#include "linmix/rng.hpp"

namespace linmix {

/// Floor sigma_min on the per-step value-variance proxy.
enum class SigmaMinRule { horizon, horizon_over_sqrt_d };

double sigma_min(SigmaMinRule rule, int horizon, int dim);

/// Regression sample of the value-targeted view: feature X = phi_{V_{h+1}}(x),
/// outcome Y = V_{h+1}(s').
struct ValueTargetRecord {
    StageIndex h = 0;
    StateId s = 0;
    ActionId a = 0;
    StateId next = 0;
    Vec feature;
    double outcome = 0.0;
};

struct ValueVariance {
    /// Posterior expectation of Var_{s' ~ P(x)}[V(s')].
    double expected = 0.0;
    /// max(expected, sigma_min^2).
    double sigma_bar_sq = 0.0;
};

/// Per-stage atoms of a discrete prior together with their kernel tables.
/// Shared immutably by every posterior snapshot derived from the prior.
class DiscreteSupport {
public:
    /// Throws unless every atom induces a proper kernel with `features`.
    DiscreteSupport(std::shared_ptr<const FeatureMap> features, std::vector<std::vector<Vec>> atoms);

    const FeatureMap& features() const { return *features_; }
    const std::shared_ptr<const FeatureMap>& feature_ptr() const { return features_; }
    int horizon() const { return static_cast<int>(atoms_.size()); }
    int atom_count(StageIndex h) const { return static_cast<int>(atoms_[h].size()); }
    const Vec& atom(StageIndex h, int i) const { return atoms_[h][i]; }

    /// P_i(. | x) for atom i of stage x.h.
    std::span<const double> kernel(int atom, const Step& x) const;

private:
    std::shared_ptr<const FeatureMap> features_;
    std::vector<std::vector<Vec>> atoms_;
    std::vector<std::vector<std::vector<double>>> kernels_;  // [h][i][(s, a, s')]
};

/// Whether a discrete update renormalizes. `skip` exists only so the verifier
/// suite can demonstrate that it detects a broken Bayes update.
enum class Normalization { renormalize, skip };

/// Exact posterior over a discrete, stage-independent prior.
class DiscretePosterior {
public:
    DiscretePosterior(std::shared_ptr<const DiscreteSupport> support,
                      std::vector<std::vector<double>> weights);
    static DiscretePosterior uniform(std::shared_ptr<const DiscreteSupport> support);

    const DiscreteSupport& support() const { return *support_; }
    const std::shared_ptr<const DiscreteSupport>& support_ptr() const { return support_; }
    const FeatureMap& features() const { return support_->features(); }
    int horizon() const { return support_->horizon(); }
    const std::vector<double>& weights(StageIndex h) const { return weights_[h]; }

    /// Bayes rule on the transition x -> next; other stages are untouched.
    void update(const Step& x, StateId next, Normalization mode = Normalization::renormalize);
    DiscretePosterior updated(const Step& x, StateId next,
                              Normalization mode = Normalization::renormalize) const;

    Vec mean(StageIndex h) const;
    /// Gamma_h = sum_i w_i (theta_i - mean)(theta_i - mean)^T.
    Mat covariance(StageIndex h) const;
    ParameterSet mean_parameters() const;
    ParameterSet sample(Rng& rng) const;

    /// Pr(s' | x) = sum_i w_i P_i(s' | x).
    std::vector<double> predictive(const Step& x) const;
    ValueVariance expected_value_variance(const Step& x, std::span<const double> values,
                                          double sigma_min) const;

private:
    std::shared_ptr<const DiscreteSupport> support_;
    std::vector<std::vector<double>> weights_;
};

/// Gaussian value-targeted-regression posterior, one (mean, covariance) per
/// stage. Stored in covariance form so singular priors are allowed; each
/// update is the rank-one precision update Lambda += X X^T / sigma_bar^2.
class GaussianPosterior {
public:
    GaussianPosterior(std::shared_ptr<const FeatureMap> features, std::vector<Vec> means,
                      std::vector<Mat> covariances);
    /// Gaussian with the mean and covariance of a discrete posterior.
    static GaussianPosterior moment_matched(const DiscretePosterior& discrete);

    const FeatureMap& features() const { return *features_; }
    const std::shared_ptr<const FeatureMap>& feature_ptr() const { return features_; }
    int horizon() const { return static_cast<int>(means_.size()); }

    void update(const ValueTargetRecord& record, double sigma_bar_sq);

    Vec mean(StageIndex h) const { return means_[h]; }
    Mat covariance(StageIndex h) const { return covariances_[h]; }
    ParameterSet mean_parameters() const;
    /// theta_h ~ N(mean_h, cov_h) independently; may induce improper kernels.
    ParameterSet sample(Rng& rng) const;
    ValueVariance expected_value_variance(const Step& x, std::span<const double> values,
                                          double sigma_min) const;

private:
    std::shared_ptr<const FeatureMap> features_;
    std::vector<Vec> means_;
    std::vector<Mat> covariances_;
};

using Posterior = std::variant<DiscretePosterior, GaussianPosterior>;

Mat covariance(const Posterior& post, StageIndex h);
ParameterSet sample(const Posterior& post, Rng& rng);
ParameterSet mean_parameters(const Posterior& post);
ValueVariance expected_value_variance(const Posterior& post, const Step& x,
                                      std::span<const double> values, double sigma_min);
int horizon(const Posterior& post);

/// Discrete prior with `atoms_per_stage` atoms per stage drawn uniformly on
/// the feasible simplex (fm.simplex_scale() * simplex), contracted toward its
/// barycenter by `scale` in (0, 1]. Weights are uniform.
DiscretePosterior make_discrete_prior(std::shared_ptr<const FeatureMap> fm, int atoms_per_stage,
                                      std::uint64_t seed, double scale);

// Snapshots use the environment file conventions: {"kind": "discrete",
// "atoms": [[[...]]], "weights": [[...]]} or {"kind": "gaussian", "mean":
// [[...]], "covariance": [[...]]} with row-major covariances.
nlohmann::json posterior_to_json(const Posterior& post);
Posterior posterior_from_json(const nlohmann::json& j, std::shared_ptr<const FeatureMap> fm);

}  // namespace linmix
