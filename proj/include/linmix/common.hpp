#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace linmix {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

using StageIndex = int;
using StateId = int;
using ActionId = int;

/// Sizes of a finite-horizon problem: horizon H, states S, actions A and
/// feature dimension d.
struct Dims {
    int horizon = 0;
    int states = 0;
    int actions = 0;
    int dim = 0;

    friend bool operator==(const Dims&, const Dims&) = default;
};

/// A stage-state-action triple x = (h, s, a).
struct Step {
    StageIndex h = 0;
    StateId s = 0;
    ActionId a = 0;
};

inline void check_step(const Dims& dims, const Step& x) {
    if (x.h < 0 || x.h >= dims.horizon || x.s < 0 || x.s >= dims.states ||
        x.a < 0 || x.a >= dims.actions) {
        throw std::out_of_range("step (" + std::to_string(x.h) + ", " + std::to_string(x.s) +
                                ", " + std::to_string(x.a) + ") out of range");
    }
}

inline void check_state(const Dims& dims, StateId s) {
    if (s < 0 || s >= dims.states) {
        throw std::out_of_range("state " + std::to_string(s) + " out of range");
    }
}

}  // namespace linmix
