#pragma once

#include <functional>
#include <memory>

#include "linmix/harness.hpp"

namespace testing_helpers {

using namespace linmix;

/// Structure whose feature map comes from `phi(x, s')`, uniform rho unless given.
inline std::shared_ptr<const MdpStructure> structure(
    const Dims& d, const std::function<Vec(const Step&, StateId)>& phi,
    const std::function<double(const Step&)>& reward, Vec rho = Vec()) {
    FeatureMap fm(d);
    std::vector<double> r;
    for (int h = 0; h < d.horizon; ++h)
        for (int s = 0; s < d.states; ++s)
            for (int a = 0; a < d.actions; ++a) {
                for (int n = 0; n < d.states; ++n) fm.set({h, s, a}, n, phi({h, s, a}, n));
                r.push_back(reward({h, s, a}));
            }
    auto st = std::make_shared<MdpStructure>();
    st->features = std::make_shared<const FeatureMap>(std::move(fm));
    st->reward = std::move(r);
    st->rho = rho.size() ? rho : Vec::Constant(d.states, 1.0 / d.states);
    return st;
}

inline ParameterSet params(std::vector<Vec> theta) { return ParameterSet{std::move(theta), {}}; }

inline Vec vec(std::initializer_list<double> xs) {
    Vec v(static_cast<Eigen::Index>(xs.size()));
    int i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

/// Random proper pair (truth, virtual) sharing one generated structure.
inline std::pair<LinearMixtureMDP, LinearMixtureMDP> random_pair(Rng& rng, int S, int A, int H, int d,
                                                                 bool improper = false) {
    LinearMixtureMDP truth = make_simplex_mixture_env(S, A, H, d, rng.engine()());
    const double c = truth.features().simplex_scale();
    ParameterSet other;
    for (int h = 0; h < H; ++h) {
        Vec t = c * rng.simplex(d);
        if (improper) t += 0.4 * c * Vec::NullaryExpr(d, [&] { return rng.normal(); });
        other.theta.push_back(t);
    }
    auto virt = truth.with_parameters(std::move(other));
    return {std::move(truth), std::move(virt)};
}

inline Policy random_policy(Rng& rng, const Dims& d) {
    Policy pi(d.horizon, d.states);
    for (int h = 0; h < d.horizon; ++h)
        for (int s = 0; s < d.states; ++s) pi.set(h, s, rng.index(d.actions));
    return pi;
}

}  // namespace testing_helpers
