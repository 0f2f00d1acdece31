#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "linmix/common.hpp"

namespace linmix {

/// Basis-kernel tensor phi(s' | h, s, a) in R^d, stored row-major over
/// (h, s, a, s', component).
///
/// `simplex_scale` records the scale c for which the parameters on c * simplex
/// induce proper kernels (1 when the map was not built from basis kernels).
class FeatureMap {
public:
    using Block = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

    FeatureMap(Dims dims, std::vector<double> values, double simplex_scale = 1.0);
    /// Zero-filled map.
    explicit FeatureMap(Dims dims);

    const Dims& dims() const { return dims_; }
    double simplex_scale() const { return simplex_scale_; }

    /// phi(s' | x) as a d-vector.
    Eigen::Map<const Vec> at(const Step& x, StateId next) const;
    /// The S x d matrix whose rows are phi(s' | x).
    Block block(const Step& x) const;

    void set(const Step& x, StateId next, const Vec& value);

    std::span<const double> raw() const { return values_; }

private:
    std::size_t offset(const Step& x, StateId next) const;

    Dims dims_;
    std::vector<double> values_;
    double simplex_scale_ = 1.0;
};

/// Per-stage parameters Theta = (theta_0, ..., theta_{H-1}).
struct ParameterSet {
    std::vector<Vec> theta;
    std::optional<double> norm_bound;

    int horizon() const { return static_cast<int>(theta.size()); }
    /// Throws when a declared norm bound is exceeded.
    void validate(int dim) const;
};

/// Everything about an MDP except its transition parameters: features,
/// known rewards R(h, s, a) in [0, 1] and initial distribution rho.
struct MdpStructure {
    std::shared_ptr<const FeatureMap> features;
    std::vector<double> reward;  // (h, s, a) row-major
    Vec rho;
    std::uint64_t seed = 0;

    const Dims& dims() const { return features->dims(); }
    double reward_at(const Step& x) const;
    void validate() const;
};

/// A finite-horizon linear mixture MDP with P(x) = <theta_h, phi(. | x)>.
///
/// The kernel table is materialized at construction. A model is proper when
/// every row sums to 1 within 1e-10 and has entries >= -1e-12; proper rows are
/// clamped at zero, improper models keep the raw inner products.
class LinearMixtureMDP {
public:
    LinearMixtureMDP(std::shared_ptr<const MdpStructure> structure, ParameterSet params);

    /// Same features, rewards and rho with different parameters.
    LinearMixtureMDP with_parameters(ParameterSet params) const;

    const Dims& dims() const { return structure_->dims(); }
    const FeatureMap& features() const { return *structure_->features; }
    const std::shared_ptr<const MdpStructure>& structure() const { return structure_; }
    const ParameterSet& parameters() const { return params_; }
    const Vec& rho() const { return structure_->rho; }
    double reward(const Step& x) const { return structure_->reward_at(x); }
    bool proper() const { return proper_; }

    /// Next-state mixture vector for x (a probability vector when proper()).
    std::span<const double> kernel(const Step& x) const;

private:
    std::shared_ptr<const MdpStructure> structure_;
    ParameterSet params_;
    std::vector<double> kernel_;
    bool proper_ = true;
};

inline std::span<const double> kernel(const LinearMixtureMDP& model, const Step& x) {
    return model.kernel(x);
}

/// Value-correlated feature phi_V(x) = sum_{s'} phi(s' | x) V(s').
Vec value_feature(const FeatureMap& fm, const Step& x, std::span<const double> values);
Vec value_feature(const FeatureMap& fm, const Step& x, const Vec& values);

enum class Assumption1Mode { vertex_enumeration, sufficient_condition };

struct Assumption1Report {
    Assumption1Mode mode = Assumption1Mode::vertex_enumeration;
    /// Largest checked ||phi_V(x)||_2 per x, (h, s, a) row-major.
    std::vector<double> max_norm;
    double worst = 0.0;
    bool pass = true;
    double threshold = 1.0 + 1e-9;
};

/// Largest S for which the bounded-feature check enumerates all 2^S vertices.
inline constexpr int kMaxVertexStates = 12;

Assumption1Report check_assumption1(const FeatureMap& fm);

/// Random environment whose kernels are mixtures of d row-stochastic basis
/// kernels per stage; features are the basis kernels divided by one global
/// scale c so that ||phi_V(x)|| <= 1 for all V in [0, 1]^S, and theta is
/// drawn on c * simplex. Rewards are uniform on [0, 1], rho is uniform.
LinearMixtureMDP make_simplex_mixture_env(int states, int actions, int horizon, int dim,
                                          std::uint64_t seed);

// Environment files: a JSON object with S, A, H, d, seed, simplex_scale,
// phi (row-major over h, s, a, s', component), theta (per stage), reward
// (row-major over h, s, a) and rho.
nlohmann::json environment_to_json(const LinearMixtureMDP& model);
LinearMixtureMDP environment_from_json(const nlohmann::json& j);
void save_environment(const LinearMixtureMDP& model, const std::filesystem::path& path);
LinearMixtureMDP load_environment(const std::filesystem::path& path);

}  // namespace linmix
