#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "linmix/verifiers.hpp"

namespace linmix {

/// A parsed configuration file. Sections `env`, `prior`, `agent`, `run` and
/// `verify` are all optional; unknown sections or keys are rejected.
struct AppConfig {
    RunConfig run;
    VerifyConfig verify;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

AppConfig config_from_json(const nlohmann::json& j);
AppConfig load_config(const std::filesystem::path& path);

/// Every field that affects results, with its effective value. The worker
/// count is omitted: outputs do not depend on it.
nlohmann::json config_to_json(const AppConfig& cfg);

std::string_view to_string(PosteriorKind kind);
std::string_view to_string(SigmaMinRule rule);

/// Applies the LINMIX_SEED environment variable to the base run seed, if set.
void apply_seed_env(AppConfig& cfg);

}  // namespace linmix
