#pragma once

#include <optional>
#include <string_view>

#include "linmix/planner.hpp"
#include "linmix/posterior.hpp"

namespace linmix {

enum class AgentKind { psrl, posterior_mean, uniform_random, oracle };

std::string_view to_string(AgentKind kind);
AgentKind agent_kind_from_string(std::string_view name);

/// What an agent commits to for one episode.
struct EpisodePlan {
    Policy policy;
    /// Values of the model the agent planned on (V-hat), used as regression targets.
    ValueTable values;
    /// The model the agent planned on (the sampled model for PSRL).
    LinearMixtureMDP virtual_model;
    /// Set for PSRL.
    std::optional<ParameterSet> sampled;
    bool improper = false;
};

/// Plans one episode. `structure` supplies the known features, rewards and
/// rho; `truth` is read only by the oracle agent. `alg` is the episode's
/// algorithmic random stream.
EpisodePlan act_episode(AgentKind kind, const Posterior& posterior,
                        const std::shared_ptr<const MdpStructure>& structure, Rng& alg,
                        const ParameterSet* truth = nullptr);

}  // namespace linmix
