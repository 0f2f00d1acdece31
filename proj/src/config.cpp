#include "linmix/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>

namespace linmix {

namespace {

using nlohmann::json;

void reject_unknown(const json& section, const std::string& where,
                    std::initializer_list<const char*> allowed) {
    if (!section.is_object()) throw ConfigError("section '" + where + "' must be an object");
    const std::set<std::string> keys(allowed.begin(), allowed.end());
    for (const auto& [key, value] : section.items()) {
        if (!keys.contains(key)) throw ConfigError("unknown key '" + where + "." + key + "'");
    }
}

template <typename T>
void read(const json& section, const std::string& where, const char* key, T& out) {
    if (!section.contains(key)) return;
    try {
        out = section.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("bad value for '" + where + "." + key + "'");
    }
}

void read_seed(const json& section, const std::string& where, const char* key, std::uint64_t& out) {
    if (!section.contains(key)) return;
    const json& v = section.at(key);
    if (v.is_number_unsigned()) {
        out = v.get<std::uint64_t>();
    } else if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
        out = static_cast<std::uint64_t>(v.get<std::int64_t>());
    } else {
        throw ConfigError("'" + where + "." + key + "' must be a non-negative 64-bit integer");
    }
}

PosteriorKind posterior_kind_from_string(const std::string& s) {
    if (s == "discrete") return PosteriorKind::discrete;
    if (s == "gaussian") return PosteriorKind::gaussian;
    throw ConfigError("unknown prior kind '" + s + "'");
}

SigmaMinRule sigma_rule_from_string(const std::string& s) {
    if (s == "horizon") return SigmaMinRule::horizon;
    if (s == "horizon_over_sqrt_d") return SigmaMinRule::horizon_over_sqrt_d;
    throw ConfigError("unknown sigma_min rule '" + s + "'");
}

}  // namespace

std::string_view to_string(PosteriorKind kind) {
    return kind == PosteriorKind::discrete ? "discrete" : "gaussian";
}

std::string_view to_string(SigmaMinRule rule) {
    return rule == SigmaMinRule::horizon ? "horizon" : "horizon_over_sqrt_d";
}

AppConfig config_from_json(const json& j) {
    AppConfig cfg;
    reject_unknown(j, "<root>", {"env", "prior", "agent", "run", "verify"});
    RunConfig& run = cfg.run;
    if (j.contains("env")) {
        const json& e = j.at("env");
        reject_unknown(e, "env", {"states", "actions", "horizon", "dim", "seed", "file"});
        read(e, "env", "states", run.env.states);
        read(e, "env", "actions", run.env.actions);
        read(e, "env", "horizon", run.env.horizon);
        read(e, "env", "dim", run.env.dim);
        read_seed(e, "env", "seed", run.env.seed);
        read(e, "env", "file", run.env.file);
    }
    if (j.contains("prior")) {
        const json& p = j.at("prior");
        reject_unknown(p, "prior", {"kind", "atoms", "scale", "seed"});
        std::string kind(to_string(run.prior.kind));
        read(p, "prior", "kind", kind);
        run.prior.kind = posterior_kind_from_string(kind);
        read(p, "prior", "atoms", run.prior.atoms);
        read(p, "prior", "scale", run.prior.scale);
        read_seed(p, "prior", "seed", run.prior.seed);
    }
    if (j.contains("agent")) {
        const json& a = j.at("agent");
        reject_unknown(a, "agent", {"kind"});
        std::string kind(to_string(run.agent));
        read(a, "agent", "kind", kind);
        try {
            run.agent = agent_kind_from_string(kind);
        } catch (const std::exception&) {
            throw ConfigError("unknown agent kind '" + kind + "'");
        }
    }
    if (j.contains("run")) {
        const json& r = j.at("run");
        reject_unknown(r, "run", {"episodes", "replications", "seed", "sigma_min_rule", "jobs"});
        read(r, "run", "episodes", run.episodes);
        read(r, "run", "replications", run.replications);
        read_seed(r, "run", "seed", run.seed);
        std::string rule(to_string(run.sigma_min_rule));
        read(r, "run", "sigma_min_rule", rule);
        run.sigma_min_rule = sigma_rule_from_string(rule);
        read(r, "run", "jobs", run.jobs);
    }
    VerifyConfig& v = cfg.verify;
    if (j.contains("verify")) {
        const json& s = j.at("verify");
        reject_unknown(s, "verify",
                       {"seed", "identity_instances", "potential_trials", "potential_d_max",
                        "decoupling_families", "pessimism_draws", "pessimism_snapshots",
                        "episodes", "replications"});
        read_seed(s, "verify", "seed", v.seed);
        read(s, "verify", "identity_instances", v.identity_instances);
        read(s, "verify", "potential_trials", v.potential_trials);
        read(s, "verify", "potential_d_max", v.potential_d_max);
        read(s, "verify", "decoupling_families", v.decoupling_families);
        read(s, "verify", "pessimism_draws", v.pessimism_draws);
        read(s, "verify", "pessimism_snapshots", v.pessimism_snapshots);
        read(s, "verify", "episodes", v.run.episodes);
        read(s, "verify", "replications", v.run.replications);
        if (v.identity_instances < 0 || v.potential_trials < 0 || v.potential_d_max < 1 ||
            v.decoupling_families < 0 || v.pessimism_snapshots < 0 || v.run.episodes < 0 ||
            v.run.replications < 0) {
            throw ConfigError("verify sizes must be non-negative (potential_d_max >= 1)");
        }
    }
    // The traced posterior run of `verify` shares the env and prior sections.
    if (j.contains("env")) v.run.env = run.env;
    if (j.contains("prior")) v.run.prior = run.prior;
    v.run.sigma_min_rule = run.sigma_min_rule;
    v.jobs = run.jobs;
    try {
        run.validate();
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

AppConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

json config_to_json(const AppConfig& cfg) {
    const RunConfig& r = cfg.run;
    const VerifyConfig& v = cfg.verify;
    json env = {{"states", r.env.states},   {"actions", r.env.actions}, {"horizon", r.env.horizon},
                {"dim", r.env.dim},         {"seed", r.env.seed}};
    if (!r.env.file.empty()) env["file"] = r.env.file;
    return json{
        {"env", env},
        {"prior",
         {{"kind", to_string(r.prior.kind)},
          {"atoms", r.prior.atoms},
          {"scale", r.prior.scale},
          {"seed", r.prior.seed}}},
        {"agent", {{"kind", to_string(r.agent)}}},
        {"run",
         {{"episodes", r.episodes},
          {"replications", r.replications},
          {"seed", r.seed},
          {"sigma_min_rule", to_string(r.sigma_min_rule)}}},
        {"verify",
         {{"seed", v.seed},
          {"identity_instances", v.identity_instances},
          {"potential_trials", v.potential_trials},
          {"potential_d_max", v.potential_d_max},
          {"decoupling_families", v.decoupling_families},
          {"pessimism_draws", v.pessimism_draws},
          {"pessimism_snapshots", v.pessimism_snapshots},
          {"episodes", v.run.episodes},
          {"replications", v.run.replications}}},
    };
}

void apply_seed_env(AppConfig& cfg) {
    const char* raw = std::getenv("LINMIX_SEED");
    if (raw == nullptr || *raw == '\0') return;
    const std::string_view text(raw);
    std::uint64_t seed = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), seed);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw ConfigError("LINMIX_SEED must be an unsigned 64-bit integer");
    }
    cfg.run.seed = seed;
}

}  // namespace linmix
