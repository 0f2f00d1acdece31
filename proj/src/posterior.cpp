#include "linmix/posterior.hpp"

#include <algorithm>
#include <cmath>

#include "linmix/linalg.hpp"

namespace linmix {

double sigma_min(SigmaMinRule rule, int horizon, int dim) {
    switch (rule) {
        case SigmaMinRule::horizon:
            return static_cast<double>(horizon);
        case SigmaMinRule::horizon_over_sqrt_d:
            return horizon / std::sqrt(static_cast<double>(dim));
    }
    return static_cast<double>(horizon);
}

namespace {

std::size_t row_offset(const Dims& d, const Step& x) {
    return (static_cast<std::size_t>(x.s) * d.actions + x.a) * d.states;
}

double variance_under(std::span<const double> p, std::span<const double> values) {
    double m1 = 0.0;
    double m2 = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        m1 += p[i] * values[i];
        m2 += p[i] * values[i] * values[i];
    }
    return std::max(m2 - m1 * m1, 0.0);
}

}  // namespace

DiscreteSupport::DiscreteSupport(std::shared_ptr<const FeatureMap> features,
                                 std::vector<std::vector<Vec>> atoms)
    : features_(std::move(features)), atoms_(std::move(atoms)) {
    if (!features_) throw std::invalid_argument("null feature map");
    const Dims& d = features_->dims();
    if (static_cast<int>(atoms_.size()) != d.horizon) {
        throw std::invalid_argument("discrete support needs one atom list per stage");
    }
    kernels_.resize(d.horizon);
    for (int h = 0; h < d.horizon; ++h) {
        if (atoms_[h].empty()) throw std::invalid_argument("stage without atoms");
        for (const Vec& theta : atoms_[h]) {
            if (theta.size() != d.dim) throw std::invalid_argument("atom has wrong dimension");
            std::vector<double> table(static_cast<std::size_t>(d.states) * d.actions * d.states);
            for (int s = 0; s < d.states; ++s) {
                for (int a = 0; a < d.actions; ++a) {
                    const Step x{h, s, a};
                    const Vec row = features_->block(x) * theta;
                    if (std::abs(row.sum() - 1.0) > 1e-10 || row.minCoeff() < -1e-12) {
                        throw std::invalid_argument("prior atom does not induce a proper kernel");
                    }
                    for (int n = 0; n < d.states; ++n) {
                        table[row_offset(d, x) + n] = std::max(row(n), 0.0);
                    }
                }
            }
            kernels_[h].push_back(std::move(table));
        }
    }
}

std::span<const double> DiscreteSupport::kernel(int atom, const Step& x) const {
    const Dims& d = features_->dims();
    check_step(d, x);
    return {kernels_[x.h][atom].data() + row_offset(d, x), static_cast<std::size_t>(d.states)};
}

DiscretePosterior::DiscretePosterior(std::shared_ptr<const DiscreteSupport> support,
                                     std::vector<std::vector<double>> weights)
    : support_(std::move(support)), weights_(std::move(weights)) {
    if (!support_) throw std::invalid_argument("null discrete support");
    if (static_cast<int>(weights_.size()) != support_->horizon()) {
        throw std::invalid_argument("weights need one vector per stage");
    }
    for (int h = 0; h < support_->horizon(); ++h) {
        if (static_cast<int>(weights_[h].size()) != support_->atom_count(h)) {
            throw std::invalid_argument("weight count does not match atom count");
        }
        double total = 0.0;
        for (double w : weights_[h]) {
            if (!(w >= 0.0)) throw std::invalid_argument("weights must be non-negative");
            total += w;
        }
        if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("weights must sum to 1");
    }
}

DiscretePosterior DiscretePosterior::uniform(std::shared_ptr<const DiscreteSupport> support) {
    std::vector<std::vector<double>> weights;
    for (int h = 0; h < support->horizon(); ++h) {
        weights.emplace_back(support->atom_count(h), 1.0 / support->atom_count(h));
    }
    return DiscretePosterior(std::move(support), std::move(weights));
}

void DiscretePosterior::update(const Step& x, StateId next, Normalization mode) {
    check_state(features().dims(), next);
    auto& w = weights_.at(x.h);
    double total = 0.0;
    for (int i = 0; i < support_->atom_count(x.h); ++i) {
        w[i] *= support_->kernel(i, x)[next];
        total += w[i];
    }
    if (!(total > 0.0)) throw std::domain_error("observation impossible under prior support");
    if (mode == Normalization::renormalize) {
        for (double& wi : w) wi /= total;
    }
}

DiscretePosterior DiscretePosterior::updated(const Step& x, StateId next, Normalization mode) const {
    DiscretePosterior copy = *this;
    copy.update(x, next, mode);
    return copy;
}

Vec DiscretePosterior::mean(StageIndex h) const {
    Vec m = Vec::Zero(features().dims().dim);
    for (int i = 0; i < support_->atom_count(h); ++i) m += weights_[h][i] * support_->atom(h, i);
    return m;
}

Mat DiscretePosterior::covariance(StageIndex h) const {
    const Vec m = mean(h);
    const int d = features().dims().dim;
    Mat cov = Mat::Zero(d, d);
    for (int i = 0; i < support_->atom_count(h); ++i) {
        const double w = weights_[h][i];
        if (w == 0.0) continue;
        const Vec diff = support_->atom(h, i) - m;
        cov.noalias() += w * diff * diff.transpose();
    }
    return symmetrized(cov);
}

ParameterSet DiscretePosterior::mean_parameters() const {
    ParameterSet p;
    for (int h = 0; h < horizon(); ++h) p.theta.push_back(mean(h));
    return p;
}

ParameterSet DiscretePosterior::sample(Rng& rng) const {
    ParameterSet p;
    for (int h = 0; h < horizon(); ++h) {
        const int i = rng.categorical(weights_[h]);
        p.theta.push_back(support_->atom(h, i));
    }
    return p;
}

std::vector<double> DiscretePosterior::predictive(const Step& x) const {
    const Dims& d = features().dims();
    std::vector<double> out(d.states, 0.0);
    for (int i = 0; i < support_->atom_count(x.h); ++i) {
        const auto p = support_->kernel(i, x);
        for (int n = 0; n < d.states; ++n) out[n] += weights_[x.h][i] * p[n];
    }
    return out;
}

ValueVariance DiscretePosterior::expected_value_variance(const Step& x,
                                                         std::span<const double> values,
                                                         double sigma_min) const {
    if (static_cast<int>(values.size()) != features().dims().states) {
        throw std::invalid_argument("value vector has wrong size");
    }
    ValueVariance out;
    for (int i = 0; i < support_->atom_count(x.h); ++i) {
        out.expected += weights_[x.h][i] * variance_under(support_->kernel(i, x), values);
    }
    out.sigma_bar_sq = std::max(out.expected, sigma_min * sigma_min);
    return out;
}

GaussianPosterior::GaussianPosterior(std::shared_ptr<const FeatureMap> features,
                                     std::vector<Vec> means, std::vector<Mat> covariances)
    : features_(std::move(features)), means_(std::move(means)),
      covariances_(std::move(covariances)) {
    if (!features_) throw std::invalid_argument("null feature map");
    const Dims& d = features_->dims();
    if (static_cast<int>(means_.size()) != d.horizon ||
        static_cast<int>(covariances_.size()) != d.horizon) {
        throw std::invalid_argument("gaussian posterior needs one mean and covariance per stage");
    }
    for (int h = 0; h < d.horizon; ++h) {
        if (means_[h].size() != d.dim || covariances_[h].rows() != d.dim ||
            covariances_[h].cols() != d.dim) {
            throw std::invalid_argument("gaussian posterior has wrong dimension");
        }
        covariances_[h] = symmetrized(covariances_[h]);
        if (min_eigenvalue(covariances_[h]) < -1e-10) {
            throw std::invalid_argument("covariance is not positive semi-definite");
        }
    }
}

GaussianPosterior GaussianPosterior::moment_matched(const DiscretePosterior& discrete) {
    std::vector<Vec> means;
    std::vector<Mat> covs;
    for (int h = 0; h < discrete.horizon(); ++h) {
        means.push_back(discrete.mean(h));
        covs.push_back(discrete.covariance(h));
    }
    return GaussianPosterior(discrete.support().feature_ptr(), std::move(means), std::move(covs));
}

void GaussianPosterior::update(const ValueTargetRecord& record, double sigma_bar_sq) {
    if (!record.feature.allFinite() || !std::isfinite(record.outcome)) {
        throw std::invalid_argument("value-target record is not finite");
    }
    if (!(sigma_bar_sq > 0.0)) throw std::invalid_argument("sigma_bar^2 must be positive");
    Mat& cov = covariances_.at(record.h);
    Vec& mean = means_.at(record.h);
    if (record.feature.size() != mean.size()) throw std::invalid_argument("feature dimension mismatch");
    const Vec gain_dir = cov * record.feature;
    const double denom = sigma_bar_sq + record.feature.dot(gain_dir);
    mean += gain_dir * ((record.outcome - record.feature.dot(mean)) / denom);
    cov -= gain_dir * gain_dir.transpose() / denom;
    cov = symmetrized(cov);
}

ParameterSet GaussianPosterior::mean_parameters() const {
    ParameterSet p;
    p.theta = means_;
    return p;
}

ParameterSet GaussianPosterior::sample(Rng& rng) const {
    ParameterSet p;
    const int d = features_->dims().dim;
    for (int h = 0; h < horizon(); ++h) {
        Vec z(d);
        for (int k = 0; k < d; ++k) z(k) = rng.normal();
        p.theta.push_back(means_[h] + psd_sqrt(covariances_[h]) * z);
    }
    return p;
}

ValueVariance GaussianPosterior::expected_value_variance(const Step& x,
                                                         std::span<const double> values,
                                                         double sigma_min) const {
    // E[<theta, phi_{V^2}>] - E[<theta, phi_V>^2], exact for the linear kernel.
    std::vector<double> squared(values.begin(), values.end());
    for (double& v : squared) v *= v;
    const Vec x1 = value_feature(*features_, x, values);
    const Vec x2 = value_feature(*features_, x, squared);
    const Vec& m = means_[x.h];
    const double first = m.dot(x1);
    ValueVariance out;
    out.expected = std::max(m.dot(x2) - first * first - x1.dot(covariances_[x.h] * x1), 0.0);
    out.sigma_bar_sq = std::max(out.expected, sigma_min * sigma_min);
    return out;
}

Mat covariance(const Posterior& post, StageIndex h) {
    return std::visit([h](const auto& p) { return p.covariance(h); }, post);
}

ParameterSet sample(const Posterior& post, Rng& rng) {
    return std::visit([&rng](const auto& p) { return p.sample(rng); }, post);
}

ParameterSet mean_parameters(const Posterior& post) {
    return std::visit([](const auto& p) { return p.mean_parameters(); }, post);
}

ValueVariance expected_value_variance(const Posterior& post, const Step& x,
                                      std::span<const double> values, double sigma_min) {
    return std::visit(
        [&](const auto& p) { return p.expected_value_variance(x, values, sigma_min); }, post);
}

int horizon(const Posterior& post) {
    return std::visit([](const auto& p) { return p.horizon(); }, post);
}

DiscretePosterior make_discrete_prior(std::shared_ptr<const FeatureMap> fm, int atoms_per_stage,
                                      std::uint64_t seed, double scale) {
    if (atoms_per_stage < 1) throw std::invalid_argument("atoms_per_stage must be >= 1");
    if (!(scale > 0.0 && scale <= 1.0)) throw std::invalid_argument("prior scale must lie in (0, 1]");
    const Dims& d = fm->dims();
    const double c = fm->simplex_scale();
    const Vec barycenter = Vec::Constant(d.dim, c / d.dim);
    Rng rng(derive_seed(seed, 0, StreamTag::prior_atoms));
    std::vector<std::vector<Vec>> atoms(d.horizon);
    for (int h = 0; h < d.horizon; ++h) {
        for (int i = 0; i < atoms_per_stage; ++i) {
            const Vec raw = c * rng.simplex(d.dim);
            atoms[h].push_back(barycenter + scale * (raw - barycenter));
        }
    }
    return DiscretePosterior::uniform(std::make_shared<DiscreteSupport>(fm, std::move(atoms)));
}

namespace {

nlohmann::json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec json_vec(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json posterior_to_json(const Posterior& post) {
    nlohmann::json j;
    j["format"] = "linmix-posterior";
    j["version"] = 1;
    if (const auto* disc = std::get_if<DiscretePosterior>(&post)) {
        j["kind"] = "discrete";
        auto atoms = nlohmann::json::array();
        auto weights = nlohmann::json::array();
        for (int h = 0; h < disc->horizon(); ++h) {
            auto stage = nlohmann::json::array();
            for (int i = 0; i < disc->support().atom_count(h); ++i) {
                stage.push_back(vec_json(disc->support().atom(h, i)));
            }
            atoms.push_back(stage);
            weights.push_back(disc->weights(h));
        }
        j["atoms"] = atoms;
        j["weights"] = weights;
    } else {
        const auto& gauss = std::get<GaussianPosterior>(post);
        j["kind"] = "gaussian";
        auto means = nlohmann::json::array();
        auto covs = nlohmann::json::array();
        for (int h = 0; h < gauss.horizon(); ++h) {
            means.push_back(vec_json(gauss.mean(h)));
            const Mat c = gauss.covariance(h);
            std::vector<double> flat;
            for (Eigen::Index r = 0; r < c.rows(); ++r) {
                for (Eigen::Index k = 0; k < c.cols(); ++k) flat.push_back(c(r, k));
            }
            covs.push_back(flat);
        }
        j["mean"] = means;
        j["covariance"] = covs;
    }
    return j;
}

Posterior posterior_from_json(const nlohmann::json& j, std::shared_ptr<const FeatureMap> fm) {
    if (j.value("format", std::string{}) != "linmix-posterior") {
        throw std::runtime_error("not a linmix posterior snapshot");
    }
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "discrete") {
        std::vector<std::vector<Vec>> atoms;
        for (const auto& stage : j.at("atoms")) {
            auto& out = atoms.emplace_back();
            for (const auto& a : stage) out.push_back(json_vec(a));
        }
        return DiscretePosterior(std::make_shared<DiscreteSupport>(std::move(fm), std::move(atoms)),
                                 j.at("weights").get<std::vector<std::vector<double>>>());
    }
    if (kind == "gaussian") {
        const int d = fm->dims().dim;
        std::vector<Vec> means;
        std::vector<Mat> covs;
        for (const auto& m : j.at("mean")) means.push_back(json_vec(m));
        for (const auto& c : j.at("covariance")) {
            const auto flat = c.get<std::vector<double>>();
            if (static_cast<int>(flat.size()) != d * d) throw std::runtime_error("bad covariance size");
            Mat m(d, d);
            for (int r = 0; r < d; ++r) {
                for (int k = 0; k < d; ++k) m(r, k) = flat[static_cast<std::size_t>(r) * d + k];
            }
            covs.push_back(m);
        }
        return GaussianPosterior(std::move(fm), std::move(means), std::move(covs));
    }
    throw std::runtime_error("unknown posterior kind '" + kind + "'");
}

}  // namespace linmix
