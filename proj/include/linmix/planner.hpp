#pragma once

#include <span>
#include <vector>

#include "linmix/model.hpp"

namespace linmix {

/// Deterministic Markov policy pi[h][s].
class Policy {
public:
    Policy() = default;
    Policy(int horizon, int states, ActionId fill = 0);

    ActionId operator()(StageIndex h, StateId s) const { return actions_[index(h, s)]; }
    void set(StageIndex h, StateId s, ActionId a) { actions_[index(h, s)] = a; }

    int horizon() const { return horizon_; }
    int states() const { return states_; }
    const std::vector<ActionId>& raw() const { return actions_; }

    /// Throws unless every entry lies in [0, actions).
    void validate(const Dims& dims) const;

    friend bool operator==(const Policy&, const Policy&) = default;

private:
    std::size_t index(StageIndex h, StateId s) const {
        return static_cast<std::size_t>(h) * states_ + s;
    }

    int horizon_ = 0;
    int states_ = 0;
    std::vector<ActionId> actions_;
};

/// V[h][s] for h in [0, H] with V[H] = 0, and Q[h][s][a] for h in [0, H).
class ValueTable {
public:
    ValueTable() = default;
    explicit ValueTable(const Dims& dims);

    double v(StageIndex h, StateId s) const { return v_[static_cast<std::size_t>(h) * states_ + s]; }
    double& v(StageIndex h, StateId s) { return v_[static_cast<std::size_t>(h) * states_ + s]; }
    double q(StageIndex h, StateId s, ActionId a) const { return q_[qindex(h, s, a)]; }
    double& q(StageIndex h, StateId s, ActionId a) { return q_[qindex(h, s, a)]; }

    /// V[h] as a length-S view, h in [0, H].
    std::span<const double> stage(StageIndex h) const {
        return {v_.data() + static_cast<std::size_t>(h) * states_, static_cast<std::size_t>(states_)};
    }

    int horizon() const { return horizon_; }
    int states() const { return states_; }
    /// Number of (h, s) entries clamped into [0, H - h] during planning.
    int clamped = 0;

private:
    std::size_t qindex(StageIndex h, StateId s, ActionId a) const {
        return (static_cast<std::size_t>(h) * states_ + s) * actions_ + a;
    }

    int horizon_ = 0;
    int states_ = 0;
    int actions_ = 0;
    std::vector<double> v_;
    std::vector<double> q_;
};

struct Plan {
    Policy policy;
    ValueTable values;
};

/// Backward induction Q_h = R + P V_{h+1}, V_h = max_a Q_h, ties to the lowest
/// action. On improper models V_h is clamped into [0, H - h] after the max.
Plan value_iteration(const LinearMixtureMDP& model);

/// Exact value of `policy` by backward recursion; never clamps.
ValueTable policy_eval(const LinearMixtureMDP& model, const Policy& policy);

/// sum_s rho(s) V_{pi,0}(s).
double expected_value(const LinearMixtureMDP& model, const Policy& policy);
double expected_value(const LinearMixtureMDP& model, const ValueTable& values);

/// mu_h(s, a) = Pr(s_h = s, a_h = a) under the model, policy and rho.
class Occupancy {
public:
    Occupancy(const Dims& dims);
    double operator()(StageIndex h, StateId s, ActionId a) const { return mu_[index(h, s, a)]; }
    double& operator()(StageIndex h, StateId s, ActionId a) { return mu_[index(h, s, a)]; }
    /// Marginal state distribution at stage h.
    Vec state_marginal(StageIndex h) const;

private:
    std::size_t index(StageIndex h, StateId s, ActionId a) const {
        return (static_cast<std::size_t>(h) * dims_.states + s) * dims_.actions + a;
    }
    Dims dims_;
    std::vector<double> mu_;
};

/// Requires a proper model.
Occupancy occupancy(const LinearMixtureMDP& model, const Policy& policy);

/// sum_{s'} P(s' | x) V(s').
double expected_next_value(const LinearMixtureMDP& model, const Step& x,
                           std::span<const double> values);

}  // namespace linmix
