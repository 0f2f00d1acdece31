#include "linmix/agents.hpp"

#include <stdexcept>
#include <string>

namespace linmix {

std::string_view to_string(AgentKind kind) {
    switch (kind) {
        case AgentKind::psrl: return "psrl";
        case AgentKind::posterior_mean: return "posterior_mean";
        case AgentKind::uniform_random: return "uniform_random";
        case AgentKind::oracle: return "oracle";
    }
    return "psrl";
}

AgentKind agent_kind_from_string(std::string_view name) {
    for (AgentKind k : {AgentKind::psrl, AgentKind::posterior_mean, AgentKind::uniform_random,
                        AgentKind::oracle}) {
        if (to_string(k) == name) return k;
    }
    throw std::invalid_argument("unknown agent kind '" + std::string(name) + "'");
}

EpisodePlan act_episode(AgentKind kind, const Posterior& posterior,
                        const std::shared_ptr<const MdpStructure>& structure, Rng& alg,
                        const ParameterSet* truth) {
    switch (kind) {
        case AgentKind::psrl: {
            ParameterSet sampled = sample(posterior, alg);
            LinearMixtureMDP model(structure, sampled);
            Plan plan = value_iteration(model);
            const bool improper = !model.proper();
            return {std::move(plan.policy), std::move(plan.values), std::move(model),
                    std::move(sampled), improper};
        }
        case AgentKind::posterior_mean:
        case AgentKind::uniform_random: {
            LinearMixtureMDP model(structure, mean_parameters(posterior));
            Plan plan = value_iteration(model);
            if (kind == AgentKind::uniform_random) {
                const Dims& d = structure->dims();
                for (int h = 0; h < d.horizon; ++h) {
                    for (int s = 0; s < d.states; ++s) plan.policy.set(h, s, alg.index(d.actions));
                }
            }
            const bool improper = !model.proper();
            return {std::move(plan.policy), std::move(plan.values), std::move(model), std::nullopt,
                    improper};
        }
        case AgentKind::oracle: {
            if (truth == nullptr) throw std::invalid_argument("oracle agent needs the true parameters");
            LinearMixtureMDP model(structure, *truth);
            Plan plan = value_iteration(model);
            return {std::move(plan.policy), std::move(plan.values), std::move(model), std::nullopt,
                    false};
        }
    }
    throw std::invalid_argument("unknown agent kind");
}

}  // namespace linmix
