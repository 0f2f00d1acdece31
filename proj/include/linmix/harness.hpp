#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "linmix/agents.hpp"

namespace linmix {

enum class PosteriorKind { discrete, gaussian };

struct EnvSpec {
    int states = 4;
    int actions = 2;
    int horizon = 3;
    int dim = 3;
    std::uint64_t seed = 1;
    /// Environment file to load instead of generating one (empty: generate).
    std::string file;
};

struct PriorSpec {
    PosteriorKind kind = PosteriorKind::discrete;
    int atoms = 8;
    double scale = 1.0;
    std::uint64_t seed = 2;
};

struct RunConfig {
    EnvSpec env;
    PriorSpec prior;
    AgentKind agent = AgentKind::psrl;
    SigmaMinRule sigma_min_rule = SigmaMinRule::horizon;
    int episodes = 400;
    int replications = 20;
    std::uint64_t seed = 20240611;
    std::string out_dir = "./out";
    /// Worker threads; 0 means one per logical processor.
    int jobs = 0;
    /// Keep per-episode traces (posterior snapshots, plans, trajectories).
    bool keep_trace = false;
    Normalization normalization = Normalization::renormalize;

    /// Total interaction steps T = H * L.
    long total_steps() const { return static_cast<long>(env.horizon) * episodes; }
    void validate() const;
};

/// Everything shared by all replications: the MDP structure, the prior that
/// generates the true parameters and the agent's initial posterior.
struct Experiment {
    std::shared_ptr<const MdpStructure> structure;
    DiscretePosterior prior;
    Posterior initial_posterior;
    std::optional<double> norm_bound;
};

Experiment build_experiment(const RunConfig& cfg);

struct RegretRecord {
    int replication = 0;
    int episode = 0;
    double regret = 0.0;
    double cum_regret = 0.0;
    double pessimism = 0.0;
    double estimation_error = 0.0;
    double sum_sigma_bar_sq = 0.0;
    double sum_potential = 0.0;
    bool improper = false;

    friend bool operator==(const RegretRecord&, const RegretRecord&) = default;
};

/// Per-episode log kept when RunConfig::keep_trace is set.
struct EpisodeTrace {
    /// Posterior before the episode's updates.
    Posterior posterior;
    std::optional<ParameterSet> sampled;
    ParameterSet planned;
    Policy policy;
    ValueTable values;
    std::vector<StateId> states;   // s_0 .. s_H
    std::vector<ActionId> actions; // a_0 .. a_{H-1}
    std::vector<ValueTargetRecord> targets;
};

struct ReplicationResult {
    int replication = 0;
    ParameterSet truth;
    double optimal_value = 0.0;
    std::vector<RegretRecord> records;
    /// sum over episodes of min(1, ||X / sigma_bar||^2_Gamma), per stage.
    std::vector<double> stage_potential;
    std::vector<EpisodeTrace> trace;
    int improper_samples = 0;
    int clamped_entries = 0;
};

/// One replication: draw Theta* from the prior on the environment stream,
/// then for each episode plan (algorithm stream), roll out (environment
/// stream), log exact regret terms and update the posterior.
ReplicationResult run_replication(const Experiment& exp, const RunConfig& cfg, int replication);

/// All replications, in parallel; results are ordered by replication id.
std::vector<ReplicationResult> run_replications(const Experiment& exp, const RunConfig& cfg);

struct CheckpointStat {
    int episode = 0;
    double mean = 0.0;
    double std_error = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

/// Checkpoints L/4, L/2 and L.
std::vector<int> default_checkpoints(int episodes);

/// Mean and standard error of cumulative regret across replications.
std::vector<CheckpointStat> bayes_regret(const std::vector<ReplicationResult>& results,
                                         const std::vector<int>& checkpoints);

/// sqrt(2 d H^3 L sum_h log det(I + L Gamma_{1,h})).
double theorem1_bound(const std::vector<Mat>& prior_covariances, int dim, int horizon, int episodes);
double theorem1_bound(const Posterior& prior, int dim, int horizon, int episodes);
/// sqrt(2) d sqrt(H^4 L log(1 + L B^2)).
double prior_free_bound(int dim, int horizon, int episodes, double norm_bound);

/// Records of all replications sorted by (replication, episode).
std::vector<RegretRecord> collect_records(const std::vector<ReplicationResult>& results);

inline constexpr const char* kCsvHeader =
    "replication,episode,regret,cum_regret,pessimism,estimation_error,sum_sigma_bar_sq,"
    "sum_potential,improper_flag";

std::string format_csv(const std::vector<RegretRecord>& records);
void write_csv(const std::vector<RegretRecord>& records, const std::filesystem::path& path);
std::vector<RegretRecord> parse_csv(const std::string& text);
std::vector<RegretRecord> read_csv(const std::filesystem::path& path);

}  // namespace linmix
