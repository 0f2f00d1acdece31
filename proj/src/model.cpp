#include "linmix/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "linmix/rng.hpp"

namespace linmix {

namespace {

void check_dims(const Dims& dims) {
    if (dims.horizon < 1 || dims.states < 1 || dims.actions < 1 || dims.dim < 1) {
        throw std::invalid_argument("dimensions H, S, A, d must all be positive");
    }
}

std::size_t tensor_size(const Dims& dims) {
    return static_cast<std::size_t>(dims.horizon) * dims.states * dims.actions * dims.states *
           dims.dim;
}

std::size_t step_index(const Dims& dims, const Step& x) {
    return (static_cast<std::size_t>(x.h) * dims.states + x.s) * dims.actions + x.a;
}

}  // namespace

FeatureMap::FeatureMap(Dims dims, std::vector<double> values, double simplex_scale)
    : dims_(dims), values_(std::move(values)), simplex_scale_(simplex_scale) {
    check_dims(dims_);
    if (values_.size() != tensor_size(dims_)) {
        throw std::invalid_argument("feature tensor has " + std::to_string(values_.size()) +
                                    " entries, expected " + std::to_string(tensor_size(dims_)));
    }
    for (double v : values_) {
        if (!std::isfinite(v)) throw std::invalid_argument("feature tensor is not finite");
    }
    if (!(simplex_scale_ > 0.0)) throw std::invalid_argument("simplex scale must be positive");
}

FeatureMap::FeatureMap(Dims dims) : FeatureMap(dims, std::vector<double>(tensor_size(dims), 0.0)) {}

std::size_t FeatureMap::offset(const Step& x, StateId next) const {
    check_step(dims_, x);
    check_state(dims_, next);
    return (step_index(dims_, x) * dims_.states + next) * dims_.dim;
}

Eigen::Map<const Vec> FeatureMap::at(const Step& x, StateId next) const {
    return Eigen::Map<const Vec>(values_.data() + offset(x, next), dims_.dim);
}

FeatureMap::Block FeatureMap::block(const Step& x) const {
    return Block(values_.data() + offset(x, 0), dims_.states, dims_.dim);
}

void FeatureMap::set(const Step& x, StateId next, const Vec& value) {
    if (value.size() != dims_.dim) throw std::invalid_argument("feature has wrong dimension");
    std::copy(value.data(), value.data() + dims_.dim, values_.begin() + offset(x, next));
}

void ParameterSet::validate(int dim) const {
    for (std::size_t h = 0; h < theta.size(); ++h) {
        if (theta[h].size() != dim) {
            throw std::invalid_argument("theta[" + std::to_string(h) + "] has dimension " +
                                        std::to_string(theta[h].size()) + ", expected " +
                                        std::to_string(dim));
        }
        if (!theta[h].allFinite()) throw std::invalid_argument("theta is not finite");
        if (norm_bound && theta[h].norm() > *norm_bound * (1.0 + 1e-12)) {
            throw std::invalid_argument("||theta[" + std::to_string(h) + "]|| exceeds the bound B");
        }
    }
}

double MdpStructure::reward_at(const Step& x) const {
    check_step(dims(), x);
    return reward[step_index(dims(), x)];
}

void MdpStructure::validate() const {
    if (!features) throw std::invalid_argument("structure has no feature map");
    const Dims& d = dims();
    const auto n = static_cast<std::size_t>(d.horizon) * d.states * d.actions;
    if (reward.size() != n) throw std::invalid_argument("reward table has wrong size");
    for (double r : reward) {
        if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("rewards must lie in [0, 1]");
    }
    if (rho.size() != d.states) throw std::invalid_argument("rho has wrong size");
    if ((rho.array() < 0.0).any() || std::abs(rho.sum() - 1.0) > 1e-12) {
        throw std::invalid_argument("rho must be a probability vector");
    }
}

LinearMixtureMDP::LinearMixtureMDP(std::shared_ptr<const MdpStructure> structure,
                                   ParameterSet params)
    : structure_(std::move(structure)), params_(std::move(params)) {
    if (!structure_) throw std::invalid_argument("null structure");
    structure_->validate();
    const Dims& d = dims();
    if (params_.horizon() != d.horizon) {
        throw std::invalid_argument("parameter set has " + std::to_string(params_.horizon()) +
                                    " stages, expected " + std::to_string(d.horizon));
    }
    params_.validate(d.dim);

    const FeatureMap& fm = *structure_->features;
    kernel_.resize(static_cast<std::size_t>(d.horizon) * d.states * d.actions * d.states);
    auto* out = kernel_.data();
    for (int h = 0; h < d.horizon; ++h) {
        for (int s = 0; s < d.states; ++s) {
            for (int a = 0; a < d.actions; ++a) {
                const Vec row = fm.block({h, s, a}) * params_.theta[h];
                if (std::abs(row.sum() - 1.0) > 1e-10 || row.minCoeff() < -1e-12) proper_ = false;
                std::copy(row.data(), row.data() + d.states, out);
                out += d.states;
            }
        }
    }
    if (proper_) {
        for (double& p : kernel_) p = std::max(p, 0.0);
    }
}

LinearMixtureMDP LinearMixtureMDP::with_parameters(ParameterSet params) const {
    return LinearMixtureMDP(structure_, std::move(params));
}

std::span<const double> LinearMixtureMDP::kernel(const Step& x) const {
    check_step(dims(), x);
    return {kernel_.data() + step_index(dims(), x) * dims().states,
            static_cast<std::size_t>(dims().states)};
}

Vec value_feature(const FeatureMap& fm, const Step& x, std::span<const double> values) {
    if (static_cast<int>(values.size()) != fm.dims().states) {
        throw std::invalid_argument("value vector has " + std::to_string(values.size()) +
                                    " entries, expected " + std::to_string(fm.dims().states));
    }
    Eigen::Map<const Vec> v(values.data(), fm.dims().states);
    return fm.block(x).transpose() * v;
}

Vec value_feature(const FeatureMap& fm, const Step& x, const Vec& values) {
    return value_feature(fm, x, std::span<const double>(values.data(), values.size()));
}

namespace {

// max over V in {0,1}^S of ||sum_{s'} V(s') phi(s'|x)||, via Gray-code walk.
double vertex_max_norm(const FeatureMap::Block& block) {
    const int states = static_cast<int>(block.rows());
    Vec acc = Vec::Zero(block.cols());
    double best = 0.0;
    const std::uint32_t count = 1u << states;
    std::uint32_t prev = 0;
    for (std::uint32_t i = 1; i < count; ++i) {
        const std::uint32_t gray = i ^ (i >> 1);
        const std::uint32_t flipped = gray ^ prev;
        const int bit = __builtin_ctz(flipped);
        if (gray & flipped) {
            acc += block.row(bit).transpose();
        } else {
            acc -= block.row(bit).transpose();
        }
        prev = gray;
        best = std::max(best, acc.norm());
    }
    return best;
}

double sufficient_norm(const FeatureMap::Block& block) {
    double total = 0.0;
    for (int s = 0; s < block.rows(); ++s) total += block.row(s).norm();
    return total;
}

}  // namespace

Assumption1Report check_assumption1(const FeatureMap& fm) {
    const Dims& d = fm.dims();
    Assumption1Report report;
    report.mode = d.states <= kMaxVertexStates ? Assumption1Mode::vertex_enumeration
                                               : Assumption1Mode::sufficient_condition;
    for (int h = 0; h < d.horizon; ++h) {
        for (int s = 0; s < d.states; ++s) {
            for (int a = 0; a < d.actions; ++a) {
                const auto block = fm.block({h, s, a});
                const double norm = report.mode == Assumption1Mode::vertex_enumeration
                                        ? vertex_max_norm(block)
                                        : sufficient_norm(block);
                report.max_norm.push_back(norm);
                report.worst = std::max(report.worst, norm);
            }
        }
    }
    report.pass = report.worst <= report.threshold;
    return report;
}

LinearMixtureMDP make_simplex_mixture_env(int states, int actions, int horizon, int dim,
                                          std::uint64_t seed) {
    const Dims dims{horizon, states, actions, dim};
    check_dims(dims);
    Rng rng(derive_seed(seed, 0, StreamTag::env_generator));

    // Unscaled tensor: component k of phi(s'|x) is P_k(s'|x).
    std::vector<double> basis(tensor_size(dims));
    for (int h = 0; h < horizon; ++h) {
        for (int k = 0; k < dim; ++k) {
            for (int s = 0; s < states; ++s) {
                for (int a = 0; a < actions; ++a) {
                    const Vec row = rng.simplex(states);
                    for (int next = 0; next < states; ++next) {
                        const std::size_t idx =
                            (step_index(dims, {h, s, a}) * states + next) * dim + k;
                        basis[idx] = row(next);
                    }
                }
            }
        }
    }
    const double scale = check_assumption1(FeatureMap(dims, basis)).worst;
    for (double& v : basis) v /= scale;
    auto features = std::make_shared<FeatureMap>(dims, std::move(basis), scale);

    ParameterSet params;
    params.norm_bound = scale;
    for (int h = 0; h < horizon; ++h) params.theta.push_back(scale * rng.simplex(dim));

    auto structure = std::make_shared<MdpStructure>();
    structure->features = std::move(features);
    structure->reward.resize(static_cast<std::size_t>(horizon) * states * actions);
    for (double& r : structure->reward) r = rng.uniform();
    structure->rho = Vec::Constant(states, 1.0 / states);
    structure->seed = seed;
    return LinearMixtureMDP(std::move(structure), std::move(params));
}

nlohmann::json environment_to_json(const LinearMixtureMDP& model) {
    const Dims& d = model.dims();
    nlohmann::json j;
    j["format"] = "linmix-environment";
    j["version"] = 1;
    j["S"] = d.states;
    j["A"] = d.actions;
    j["H"] = d.horizon;
    j["d"] = d.dim;
    j["seed"] = model.structure()->seed;
    j["simplex_scale"] = model.features().simplex_scale();
    const auto raw = model.features().raw();
    j["phi"] = std::vector<double>(raw.begin(), raw.end());
    auto theta = nlohmann::json::array();
    for (const Vec& t : model.parameters().theta) {
        theta.push_back(std::vector<double>(t.data(), t.data() + t.size()));
    }
    j["theta"] = theta;
    if (model.parameters().norm_bound) {
        j["norm_bound"] = *model.parameters().norm_bound;
    } else {
        j["norm_bound"] = nullptr;
    }
    j["reward"] = model.structure()->reward;
    j["rho"] = std::vector<double>(model.rho().data(), model.rho().data() + model.rho().size());
    return j;
}

LinearMixtureMDP environment_from_json(const nlohmann::json& j) {
    if (j.value("format", std::string{}) != "linmix-environment") {
        throw std::runtime_error("not a linmix environment file");
    }
    const Dims dims{j.at("H").get<int>(), j.at("S").get<int>(), j.at("A").get<int>(),
                    j.at("d").get<int>()};
    auto features = std::make_shared<FeatureMap>(dims, j.at("phi").get<std::vector<double>>(),
                                                 j.at("simplex_scale").get<double>());
    ParameterSet params;
    for (const auto& t : j.at("theta")) {
        const auto v = t.get<std::vector<double>>();
        params.theta.push_back(Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())));
    }
    if (j.contains("norm_bound") && !j.at("norm_bound").is_null()) {
        params.norm_bound = j.at("norm_bound").get<double>();
    }
    auto structure = std::make_shared<MdpStructure>();
    structure->features = std::move(features);
    structure->reward = j.at("reward").get<std::vector<double>>();
    const auto rho = j.at("rho").get<std::vector<double>>();
    structure->rho = Eigen::Map<const Vec>(rho.data(), static_cast<Eigen::Index>(rho.size()));
    structure->seed = j.at("seed").get<std::uint64_t>();
    return LinearMixtureMDP(std::move(structure), std::move(params));
}

void save_environment(const LinearMixtureMDP& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << environment_to_json(model).dump(1) << '\n';
}

LinearMixtureMDP load_environment(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    return environment_from_json(nlohmann::json::parse(in));
}

}  // namespace linmix
