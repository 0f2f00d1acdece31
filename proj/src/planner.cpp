#include "linmix/planner.hpp"

#include <algorithm>
#include <stdexcept>

namespace linmix {

Policy::Policy(int horizon, int states, ActionId fill)
    : horizon_(horizon), states_(states),
      actions_(static_cast<std::size_t>(horizon) * states, fill) {}

void Policy::validate(const Dims& dims) const {
    if (horizon_ != dims.horizon || states_ != dims.states) {
        throw std::invalid_argument("policy shape does not match the model");
    }
    for (ActionId a : actions_) {
        if (a < 0 || a >= dims.actions) throw std::out_of_range("policy action out of range");
    }
}

ValueTable::ValueTable(const Dims& dims)
    : horizon_(dims.horizon), states_(dims.states), actions_(dims.actions),
      v_(static_cast<std::size_t>(dims.horizon + 1) * dims.states, 0.0),
      q_(static_cast<std::size_t>(dims.horizon) * dims.states * dims.actions, 0.0) {}

double expected_next_value(const LinearMixtureMDP& model, const Step& x,
                           std::span<const double> values) {
    const auto p = model.kernel(x);
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) acc += p[i] * values[i];
    return acc;
}

Plan value_iteration(const LinearMixtureMDP& model) {
    const Dims& d = model.dims();
    Plan plan{Policy(d.horizon, d.states), ValueTable(d)};
    for (int h = d.horizon - 1; h >= 0; --h) {
        const auto next = plan.values.stage(h + 1);
        for (int s = 0; s < d.states; ++s) {
            ActionId best_action = 0;
            double best = 0.0;
            for (int a = 0; a < d.actions; ++a) {
                const Step x{h, s, a};
                const double q = model.reward(x) + expected_next_value(model, x, next);
                plan.values.q(h, s, a) = q;
                if (a == 0 || q > best) {
                    best = q;
                    best_action = a;
                }
            }
            if (!model.proper()) {
                const double clamped = std::clamp(best, 0.0, static_cast<double>(d.horizon - h));
                if (clamped != best) ++plan.values.clamped;
                best = clamped;
            }
            plan.values.v(h, s) = best;
            plan.policy.set(h, s, best_action);
        }
    }
    return plan;
}

ValueTable policy_eval(const LinearMixtureMDP& model, const Policy& policy) {
    const Dims& d = model.dims();
    policy.validate(d);
    ValueTable table(d);
    for (int h = d.horizon - 1; h >= 0; --h) {
        const auto next = table.stage(h + 1);
        for (int s = 0; s < d.states; ++s) {
            for (int a = 0; a < d.actions; ++a) {
                const Step x{h, s, a};
                table.q(h, s, a) = model.reward(x) + expected_next_value(model, x, next);
            }
            table.v(h, s) = table.q(h, s, policy(h, s));
        }
    }
    return table;
}

double expected_value(const LinearMixtureMDP& model, const ValueTable& values) {
    const auto v0 = values.stage(0);
    double acc = 0.0;
    for (int s = 0; s < model.dims().states; ++s) acc += model.rho()(s) * v0[s];
    return acc;
}

double expected_value(const LinearMixtureMDP& model, const Policy& policy) {
    return expected_value(model, policy_eval(model, policy));
}

Occupancy::Occupancy(const Dims& dims)
    : dims_(dims),
      mu_(static_cast<std::size_t>(dims.horizon) * dims.states * dims.actions, 0.0) {}

Vec Occupancy::state_marginal(StageIndex h) const {
    Vec out = Vec::Zero(dims_.states);
    for (int s = 0; s < dims_.states; ++s) {
        for (int a = 0; a < dims_.actions; ++a) out(s) += (*this)(h, s, a);
    }
    return out;
}

Occupancy occupancy(const LinearMixtureMDP& model, const Policy& policy) {
    if (!model.proper()) throw std::invalid_argument("occupancy requires a proper model");
    const Dims& d = model.dims();
    policy.validate(d);
    Occupancy mu(d);
    Vec state = model.rho();
    for (int h = 0; h < d.horizon; ++h) {
        Vec next = Vec::Zero(d.states);
        for (int s = 0; s < d.states; ++s) {
            const ActionId a = policy(h, s);
            mu(h, s, a) = state(s);
            const auto p = model.kernel({h, s, a});
            for (int sn = 0; sn < d.states; ++sn) next(sn) += state(s) * p[sn];
        }
        state = next;
    }
    return mu;
}

}  // namespace linmix
