#pragma once

#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "linmix/harness.hpp"

namespace linmix {

enum class CheckMode { exact, monte_carlo };

/// Outcome of one executable check. Slack is signed: negative means the
/// checked inequality or identity is violated by that amount.
struct CheckReport {
    std::string name;
    CheckMode mode = CheckMode::exact;
    long instances = 0;
    long skipped = 0;
    double worst_slack = std::numeric_limits<double>::infinity();
    double tolerance = 0.0;
    bool pass = true;
    std::string note;

    CheckReport() = default;
    CheckReport(std::string name, CheckMode mode, double tolerance)
        : name(std::move(name)), mode(mode), tolerance(tolerance) {}

    void observe(double slack);
    /// Merges another report of the same check.
    void absorb(const CheckReport& other);
    /// pass <=> worst_slack >= -tolerance; no instances passes vacuously.
    CheckReport& finalize();
};

// Potential lemma: log(1 + V'SV) + f(S', x) <= f(S, x + V'V) with
// f(S, x) = log det(I + xS) and S' = S - SVV'S / (1 + V'SV).

double potential_lemma_slack(const Mat& sigma, const Vec& v, double x);
CheckReport check_potential_lemma(int trials, int d_max, Rng& rng);

// Decoupling: theta* takes atoms with weights, theta-hat is an independent
// copy and phi = g(theta*, theta-hat, omega) with omega finite.

struct DecouplingFamily {
    std::vector<Vec> atoms;
    std::vector<double> weights;
    std::vector<double> omega_weights;
    /// phi for (i = theta* atom, j = theta-hat atom, k = omega), index (i * n + j) * m + k.
    std::vector<Vec> phi;

    int dim() const { return static_cast<int>(atoms.front().size()); }
};

struct DecouplingTerms {
    /// (E|<theta-hat - theta*, phi>|)^2 and 2d E[phi' Var(theta*) phi].
    double lhs_2d = 0.0, rhs_2d = 0.0;
    /// (E|<theta-hat - E theta-hat, phi>|)^2 and d E[phi' Var(theta*) phi].
    double lhs_centered = 0.0, rhs_centered = 0.0;
    /// Trace form with X = theta-hat - theta*, Z = phi: d Tr(E[XX'] E[ZZ']).
    double lhs_trace = 0.0, rhs_trace = 0.0;
    /// d Tr(Var(theta-hat) E[phi phi']), equal to rhs_centered by the i.i.d. copy.
    double rhs_centered_trace = 0.0;
};

DecouplingTerms decoupling_terms(const DecouplingFamily& family);
/// Random family; `dependence` 0: phi independent, 1: phi = theta*, 2: phi
/// = theta-hat - theta*, otherwise a random table over (i, j, k).
DecouplingFamily random_decoupling_family(Rng& rng, int d_max, int max_atoms, int dependence);
CheckReport check_decoupling(const std::vector<DecouplingFamily>& families);

// Exact identities on a (true, virtual) model pair.

CheckReport check_simulation_lemma(const LinearMixtureMDP& truth, const LinearMixtureMDP& virtual_model,
                                   const Policy& policy);
/// Per-stage, per-state form checked on enumerated histories (H <= 3, S <= 3).
CheckReport check_simulation_history(const LinearMixtureMDP& truth,
                                     const LinearMixtureMDP& virtual_model, const Policy& policy);
CheckReport check_ltv(const LinearMixtureMDP& model, const Policy& policy);
CheckReport check_variance_difference(const LinearMixtureMDP& truth,
                                      const LinearMixtureMDP& virtual_model, const Policy& policy,
                                      const Step& x);
/// Every logged episode of a traced replication.
CheckReport check_estimation_decomposition(const Experiment& exp, const ReplicationResult& run);

// Posterior variance reduction on a discrete posterior at one step.

struct VarianceReductionTerms {
    Mat gamma;
    Mat expected_next;  ///< E[Gamma+] enumerated over s' ~ posterior predictive
    Vec feature;        ///< X = phi_V(x)
    double expected_variance = 0.0;
    double sigma_bar_sq = 0.0;
};

VarianceReductionTerms variance_reduction_terms(const DiscretePosterior& post, const Step& x,
                                                std::span<const double> values, double sigma_min,
                                                Normalization mode = Normalization::renormalize);
/// lambda_min(Gamma - Gamma X X' Gamma / (E sigma^2 + X' Gamma X) - E[Gamma+]).
double variance_reduction_slack(const VarianceReductionTerms& t);
/// Slack of E[Gamma+]^{-1} >= Gamma^{-1} + X X' / sigma_bar^2 evaluated on
/// range(Gamma) after whitening by Gamma; NaN when Gamma = 0 (skipped).
double sherman_morrison_slack(const VarianceReductionTerms& t);

CheckReport check_variance_reduction(const Experiment& exp, const RunConfig& cfg,
                                     const std::vector<ReplicationResult>& runs);
CheckReport check_sherman_morrison_form(const Experiment& exp, const RunConfig& cfg,
                                        const std::vector<ReplicationResult>& runs);

// Pessimism: V*(M) - V*(M-hat) for i.i.d. M, M-hat from one posterior.

/// draws <= 0 enumerates every joint model (exact mode).
CheckReport check_pessimism_zero(const DiscretePosterior& post,
                                 const std::shared_ptr<const MdpStructure>& structure, int draws,
                                 Rng& rng);

/// The posterior checks' default run: discrete-prior PSRL with S=4, A=2,
/// H=3, d=3, 8 atoms per stage, 200 episodes and 20 replications.
RunConfig default_verify_run();

struct VerifyConfig {
    std::uint64_t seed = 7;
    int identity_instances = 50;
    int potential_trials = 10000;
    int potential_d_max = 8;
    int decoupling_families = 100;
    int pessimism_draws = 10000;
    int pessimism_snapshots = 5;
    /// Discrete-prior PSRL run used by the posterior checks.
    RunConfig run = default_verify_run();
    Normalization fault = Normalization::renormalize;
    int jobs = 0;
};

/// Every check with cfg-controlled sizes; deterministic given cfg.seed.
std::vector<CheckReport> run_all(const VerifyConfig& cfg);

std::string to_string(CheckMode mode);
std::string format_report_table(const std::vector<CheckReport>& reports);
nlohmann::json reports_to_json(const std::vector<CheckReport>& reports);

}  // namespace linmix
