#include "linmix/verifiers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

#include "linmix/linalg.hpp"
#include "linmix/parallel.hpp"

namespace linmix {

void CheckReport::observe(double slack) {
    ++instances;
    // NaN slack counts as a violation.
    if (std::isnan(slack)) {
        worst_slack = -std::numeric_limits<double>::infinity();
    } else {
        worst_slack = std::min(worst_slack, slack);
    }
}

void CheckReport::absorb(const CheckReport& other) {
    instances += other.instances;
    skipped += other.skipped;
    worst_slack = std::min(worst_slack, other.worst_slack);
}

CheckReport& CheckReport::finalize() {
    if (instances == 0) {
        pass = true;
        note = note.empty() ? "no instances" : note + "; no instances";
        return *this;
    }
    pass = worst_slack >= -tolerance;
    return *this;
}

std::string to_string(CheckMode mode) { return mode == CheckMode::exact ? "exact" : "monte-carlo"; }

// ---------------------------------------------------------------- potential

double potential_lemma_slack(const Mat& sigma, const Vec& v, double x) {
    const Vec sv = sigma * v;
    const double q = v.dot(sv);
    const Mat reduced = sigma - sv * sv.transpose() / (1.0 + q);
    const double lhs = std::log1p(q) + log_det_i_plus(reduced, x);
    const double rhs = log_det_i_plus(sigma, x + v.squaredNorm());
    return rhs - lhs;
}

CheckReport check_potential_lemma(int trials, int d_max, Rng& rng) {
    CheckReport report("potential_lemma", CheckMode::exact, 1e-9);
    for (int t = 0; t < trials; ++t) {
        const int d = 1 + rng.index(std::max(d_max, 1));
        // Every third instance is rank-deficient.
        const int rank = (t % 3 == 2 && d > 1) ? 1 + rng.index(d - 1) : d;
        Mat factor(d, rank);
        for (int i = 0; i < d; ++i) {
            for (int k = 0; k < rank; ++k) factor(i, k) = rng.normal();
        }
        const Mat sigma = factor * factor.transpose() * rng.uniform(0.05, 2.0);
        Vec v(d);
        for (int i = 0; i < d; ++i) v(i) = rng.normal() * rng.uniform(0.0, 2.0);
        const double x = 10.0 * (1.0 - rng.uniform());
        report.observe(potential_lemma_slack(sigma, v, x));
    }
    return report.finalize();
}

// --------------------------------------------------------------- decoupling

DecouplingTerms decoupling_terms(const DecouplingFamily& f) {
    const int n = static_cast<int>(f.atoms.size());
    const int m = static_cast<int>(f.omega_weights.size());
    const int d = f.dim();
    if (static_cast<int>(f.weights.size()) != n ||
        static_cast<int>(f.phi.size()) != n * n * m) {
        throw std::invalid_argument("malformed decoupling family");
    }
    Vec mean = Vec::Zero(d);
    for (int i = 0; i < n; ++i) mean += f.weights[i] * f.atoms[i];
    Mat gamma = Mat::Zero(d, d);
    for (int i = 0; i < n; ++i) {
        const Vec c = f.atoms[i] - mean;
        gamma += f.weights[i] * c * c.transpose();
    }

    double abs_diff = 0.0;
    double abs_centered = 0.0;
    double quad = 0.0;
    Mat phi_second = Mat::Zero(d, d);
    Mat diff_second = Mat::Zero(d, d);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double wij = f.weights[i] * f.weights[j];
            const Vec diff = f.atoms[j] - f.atoms[i];
            diff_second += wij * diff * diff.transpose();
            for (int k = 0; k < m; ++k) {
                const double w = wij * f.omega_weights[k];
                const Vec& phi = f.phi[(static_cast<std::size_t>(i) * n + j) * m + k];
                abs_diff += w * std::abs(diff.dot(phi));
                abs_centered += w * std::abs((f.atoms[j] - mean).dot(phi));
                quad += w * phi.dot(gamma * phi);
                phi_second += w * phi * phi.transpose();
            }
        }
    }
    DecouplingTerms t;
    t.lhs_2d = abs_diff * abs_diff;
    t.rhs_2d = 2.0 * d * quad;
    t.lhs_centered = abs_centered * abs_centered;
    t.rhs_centered = d * quad;
    t.lhs_trace = t.lhs_2d;
    t.rhs_trace = d * (diff_second * phi_second).trace();
    t.rhs_centered_trace = d * (gamma * phi_second).trace();
    return t;
}

DecouplingFamily random_decoupling_family(Rng& rng, int d_max, int max_atoms, int dependence) {
    DecouplingFamily f;
    const int d = 1 + rng.index(d_max);
    const int n = 1 + rng.index(max_atoms);
    const int m = dependence == 3 ? 1 + rng.index(3) : 1;
    auto random_vec = [&](int size) {
        Vec v(size);
        for (int i = 0; i < size; ++i) v(i) = rng.normal();
        return v;
    };
    for (int i = 0; i < n; ++i) f.atoms.push_back(random_vec(d));
    const Vec w = rng.simplex(n);
    f.weights.assign(w.data(), w.data() + n);
    const Vec q = rng.simplex(m);
    f.omega_weights.assign(q.data(), q.data() + m);
    const Vec fixed = random_vec(d);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            for (int k = 0; k < m; ++k) {
                switch (dependence) {
                    case 0: f.phi.push_back(fixed); break;
                    case 1: f.phi.push_back(f.atoms[i]); break;
                    case 2: f.phi.push_back(f.atoms[j] - f.atoms[i]); break;
                    default: f.phi.push_back(random_vec(d)); break;
                }
            }
        }
    }
    return f;
}

CheckReport check_decoupling(const std::vector<DecouplingFamily>& families) {
    CheckReport report("decoupling", CheckMode::exact, 1e-9);
    for (const auto& f : families) {
        const DecouplingTerms t = decoupling_terms(f);
        const double scale = std::max(1.0, std::abs(t.rhs_2d));
        const double slack = std::min({t.rhs_2d - t.lhs_2d, t.rhs_centered - t.lhs_centered,
                                       t.rhs_trace - t.lhs_trace,
                                       -std::abs(t.rhs_trace - t.rhs_2d) / scale,
                                       -std::abs(t.rhs_centered_trace - t.rhs_centered) / scale});
        report.observe(slack);
    }
    return report.finalize();
}

// ------------------------------------------------------- exact identities

namespace {

double value_gap(const LinearMixtureMDP& truth, const LinearMixtureMDP& virtual_model, const Step& x,
                 std::span<const double> values) {
    return expected_next_value(virtual_model, x, values) - expected_next_value(truth, x, values);
}

double variance_of(std::span<const double> p, std::span<const double> values) {
    double mean = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) mean += p[i] * values[i];
    double var = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) var += p[i] * (values[i] - mean) * (values[i] - mean);
    return var;
}

}  // namespace

CheckReport check_simulation_lemma(const LinearMixtureMDP& truth,
                                   const LinearMixtureMDP& virtual_model, const Policy& policy) {
    CheckReport report("simulation_lemma", CheckMode::exact, 1e-9);
    const Dims& d = truth.dims();
    const ValueTable virtual_values = policy_eval(virtual_model, policy);
    const double lhs = expected_value(virtual_model, virtual_values) - expected_value(truth, policy);
    const Occupancy mu = occupancy(truth, policy);
    double rhs = 0.0;
    for (int h = 0; h < d.horizon; ++h) {
        for (int s = 0; s < d.states; ++s) {
            for (int a = 0; a < d.actions; ++a) {
                if (mu(h, s, a) == 0.0) continue;
                rhs += mu(h, s, a) * value_gap(truth, virtual_model, {h, s, a},
                                               virtual_values.stage(h + 1));
            }
        }
    }
    report.observe(-std::abs(lhs - rhs));
    return report.finalize();
}

CheckReport check_simulation_history(const LinearMixtureMDP& truth,
                                     const LinearMixtureMDP& virtual_model, const Policy& policy) {
    CheckReport report("simulation_history", CheckMode::exact, 1e-9);
    const Dims& d = truth.dims();
    if (d.horizon > 3 || d.states > 3) {
        ++report.skipped;
        return report.finalize();
    }
    const ValueTable vhat = policy_eval(virtual_model, policy);
    const ValueTable v = policy_eval(truth, policy);
    // Sum over every continuation path of its probability times the
    // accumulated value-targeted model error.
    std::function<double(int, StateId, double, double)> walk = [&](int j, StateId s, double prob,
                                                                   double acc) -> double {
        if (j == d.horizon) return prob * acc;
        const Step x{j, s, policy(j, s)};
        const double err = value_gap(truth, virtual_model, x, vhat.stage(j + 1));
        const auto p = truth.kernel(x);
        double total = 0.0;
        for (int n = 0; n < d.states; ++n) {
            if (p[n] > 0.0) total += walk(j + 1, n, prob * p[n], acc + err);
        }
        return total;
    };
    for (int h = 0; h < d.horizon; ++h) {
        for (int s = 0; s < d.states; ++s) {
            const double delta = vhat.v(h, s) - v.v(h, s);
            report.observe(-std::abs(delta - walk(h, s, 1.0, 0.0)));
        }
    }
    return report.finalize();
}

CheckReport check_ltv(const LinearMixtureMDP& model, const Policy& policy) {
    CheckReport report("ltv", CheckMode::exact, 1e-9);
    const Dims& d = model.dims();
    if (!model.proper()) throw std::invalid_argument("check_ltv requires a proper model");
    if (d.horizon * std::log(static_cast<double>(d.states)) > std::log(1e6)) {
        throw std::invalid_argument("check_ltv: too many trajectories to enumerate");
    }
    const ValueTable v = policy_eval(model, policy);
    // expected cumulative one-step value variance, by backward recursion
    std::vector<double> w(d.states, 0.0);
    for (int h = d.horizon - 1; h >= 0; --h) {
        std::vector<double> next(d.states, 0.0);
        for (int s = 0; s < d.states; ++s) {
            const auto p = model.kernel({h, s, policy(h, s)});
            double acc = variance_of(p, v.stage(h + 1));
            for (int n = 0; n < d.states; ++n) acc += p[n] * w[n];
            next[s] = acc;
        }
        w = std::move(next);
    }
    const double bound = static_cast<double>(d.horizon) * d.horizon;
    for (int s0 = 0; s0 < d.states; ++s0) {
        std::vector<std::pair<double, double>> paths;  // (probability, total reward)
        std::function<void(int, StateId, double, double)> walk = [&](int h, StateId s, double prob,
                                                                     double total) {
            const Step x{h, s, policy(h, s)};
            const double r = total + model.reward(x);
            if (h + 1 == d.horizon) {
                paths.emplace_back(prob, r);
                return;
            }
            const auto p = model.kernel(x);
            for (int n = 0; n < d.states; ++n) {
                if (p[n] > 0.0) walk(h + 1, n, prob * p[n], r);
            }
        };
        walk(0, s0, 1.0, 0.0);
        double mean = 0.0;
        for (const auto& [p, r] : paths) mean += p * r;
        double var = 0.0;
        for (const auto& [p, r] : paths) var += p * (r - mean) * (r - mean);
        report.observe(std::min(-std::abs(var - w[s0]), bound - var));
    }
    return report.finalize();
}

CheckReport check_variance_difference(const LinearMixtureMDP& truth,
                                      const LinearMixtureMDP& virtual_model, const Policy& policy,
                                      const Step& x) {
    CheckReport report("variance_difference", CheckMode::exact, 1e-9);
    const Dims& d = truth.dims();
    const ValueTable vhat = policy_eval(virtual_model, policy);
    const ValueTable v = policy_eval(truth, policy);
    const auto p = truth.kernel(x);
    const auto vh = vhat.stage(x.h + 1);
    const auto vt = v.stage(x.h + 1);
    double gap = 0.0;
    for (int n = 0; n < d.states; ++n) gap += p[n] * std::abs(vh[n] - vt[n]);
    const double diff = variance_of(p, vh) - variance_of(p, vt);
    report.observe(2.0 * d.horizon * gap - diff);
    return report.finalize();
}

CheckReport check_estimation_decomposition(const Experiment& exp, const ReplicationResult& run) {
    CheckReport report("estimation_decomposition", CheckMode::exact, 1e-9);
    const Dims& d = exp.structure->dims();
    const FeatureMap& fm = *exp.structure->features;
    const LinearMixtureMDP truth(exp.structure, run.truth);
    for (const EpisodeTrace& ep : run.trace) {
        const LinearMixtureMDP virtual_model(exp.structure, ep.planned);
        const double lhs = expected_value(virtual_model, ep.policy) - expected_value(truth, ep.policy);
        const Occupancy mu = occupancy(truth, ep.policy);
        double rhs = 0.0;
        for (int h = 0; h < d.horizon; ++h) {
            const Vec dtheta = ep.planned.theta[h] - run.truth.theta[h];
            for (int s = 0; s < d.states; ++s) {
                for (int a = 0; a < d.actions; ++a) {
                    if (mu(h, s, a) == 0.0) continue;
                    rhs += mu(h, s, a) *
                           dtheta.dot(value_feature(fm, {h, s, a}, ep.values.stage(h + 1)));
                }
            }
        }
        report.observe(-std::abs(lhs - rhs));
    }
    return report.finalize();
}

// ------------------------------------------------------ variance reduction

VarianceReductionTerms variance_reduction_terms(const DiscretePosterior& post, const Step& x,
                                                std::span<const double> values, double sigma_min,
                                                Normalization mode) {
    VarianceReductionTerms t;
    t.gamma = post.covariance(x.h);
    t.feature = value_feature(post.features(), x, values);
    const ValueVariance ev = post.expected_value_variance(x, values, sigma_min);
    t.expected_variance = ev.expected;
    t.sigma_bar_sq = ev.sigma_bar_sq;
    const auto pred = post.predictive(x);
    const int d = post.features().dims().dim;
    t.expected_next = Mat::Zero(d, d);
    for (int n = 0; n < static_cast<int>(pred.size()); ++n) {
        if (pred[n] <= 0.0) continue;
        t.expected_next += pred[n] * post.updated(x, n, mode).covariance(x.h);
    }
    return t;
}

double variance_reduction_slack(const VarianceReductionTerms& t) {
    const Vec gx = t.gamma * t.feature;
    const double denom = t.expected_variance + t.feature.dot(gx);
    Mat bound = t.gamma;
    if (denom > 0.0) bound -= gx * gx.transpose() / denom;
    return min_eigenvalue(bound - t.expected_next);
}

double sherman_morrison_slack(const VarianceReductionTerms& t) {
    Eigen::SelfAdjointEigenSolver<Mat> solver(symmetrized(t.gamma));
    const Vec& lambda = solver.eigenvalues();
    const double top = lambda.maxCoeff();
    if (!(top > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    std::vector<int> keep;
    for (int i = 0; i < lambda.size(); ++i) {
        if (lambda(i) > 1e-10 * top) keep.push_back(i);
    }
    const int r = static_cast<int>(keep.size());
    Mat whiten(t.gamma.rows(), r);
    Mat root(t.gamma.rows(), r);
    for (int k = 0; k < r; ++k) {
        const double l = lambda(keep[k]);
        whiten.col(k) = solver.eigenvectors().col(keep[k]) / std::sqrt(l);
        root.col(k) = solver.eigenvectors().col(keep[k]) * std::sqrt(l);
    }
    // In Gamma-whitened coordinates Gamma = I, E[Gamma+] = K and X = z; the
    // inverted inequality K^{-1} >= I + z z' / sigma_bar^2 is congruent to
    // I - K^{1/2} (I + z z' / sigma_bar^2) K^{1/2} >= 0.
    const Mat k = symmetrized(whiten.transpose() * t.expected_next * whiten);
    const Vec z = root.transpose() * t.feature;
    const Mat a = Mat::Identity(r, r) + z * z.transpose() / t.sigma_bar_sq;
    const Mat k_half = psd_sqrt(k);
    return min_eigenvalue(Mat::Identity(r, r) - k_half * a * k_half);
}

namespace {

template <typename SlackFn>
CheckReport scan_runs(CheckReport report, const Experiment& exp, const RunConfig& cfg,
                      const std::vector<ReplicationResult>& runs, SlackFn&& slack_of) {
    const Dims& d = exp.structure->dims();
    const double sig_min = sigma_min(cfg.sigma_min_rule, d.horizon, d.dim);
    for (const auto& run : runs) {
        for (const EpisodeTrace& ep : run.trace) {
            const auto* post = std::get_if<DiscretePosterior>(&ep.posterior);
            if (post == nullptr) throw std::invalid_argument("variance checks need a discrete posterior");
            for (int h = 0; h < d.horizon; ++h) {
                const auto terms = variance_reduction_terms(*post, {h, ep.states[h], ep.actions[h]},
                                                            ep.values.stage(h + 1), sig_min,
                                                            cfg.normalization);
                const double slack = slack_of(terms);
                if (std::isnan(slack)) {
                    ++report.skipped;
                } else {
                    report.observe(slack);
                }
            }
        }
    }
    return report.finalize();
}

}  // namespace

CheckReport check_variance_reduction(const Experiment& exp, const RunConfig& cfg,
                                     const std::vector<ReplicationResult>& runs) {
    return scan_runs(CheckReport("variance_reduction", CheckMode::exact, 1e-8), exp, cfg, runs,
                     variance_reduction_slack);
}

CheckReport check_sherman_morrison_form(const Experiment& exp, const RunConfig& cfg,
                                        const std::vector<ReplicationResult>& runs) {
    CheckReport report("sherman_morrison_form", CheckMode::exact, 1e-6);
    report.note = "whitened on range(Gamma); point-mass posteriors skipped";
    return scan_runs(std::move(report), exp, cfg, runs, sherman_morrison_slack);
}

// --------------------------------------------------------------- pessimism

namespace {

double optimal_value(const std::shared_ptr<const MdpStructure>& structure, ParameterSet params) {
    const LinearMixtureMDP model(structure, std::move(params));
    return expected_value(model, value_iteration(model).values);
}

}  // namespace

CheckReport check_pessimism_zero(const DiscretePosterior& post,
                                 const std::shared_ptr<const MdpStructure>& structure, int draws,
                                 Rng& rng) {
    const int horizon = post.horizon();
    if (draws <= 0) {
        CheckReport report("pessimism_zero", CheckMode::exact, 1e-12);
        long joint = 1;
        for (int h = 0; h < horizon; ++h) joint *= post.support().atom_count(h);
        if (joint > 4096) throw std::invalid_argument("too many joint models to enumerate");
        std::vector<double> values;
        std::vector<double> probs;
        std::vector<int> idx(horizon, 0);
        for (long c = 0; c < joint; ++c) {
            long rest = c;
            ParameterSet p;
            double prob = 1.0;
            for (int h = 0; h < horizon; ++h) {
                const int n = post.support().atom_count(h);
                const int i = static_cast<int>(rest % n);
                rest /= n;
                p.theta.push_back(post.support().atom(h, i));
                prob *= post.weights(h)[i];
            }
            values.push_back(optimal_value(structure, std::move(p)));
            probs.push_back(prob);
        }
        double mean = 0.0;
        for (std::size_t a = 0; a < values.size(); ++a) {
            for (std::size_t b = 0; b < values.size(); ++b) {
                mean += probs[a] * probs[b] * (values[a] - values[b]);
            }
        }
        report.observe(-std::abs(mean));
        return report.finalize();
    }
    CheckReport report("pessimism_zero", CheckMode::monte_carlo, 0.0);
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int i = 0; i < draws; ++i) {
        const double truth = optimal_value(structure, post.sample(rng));
        const double sampled = optimal_value(structure, post.sample(rng));
        const double diff = truth - sampled;
        sum += diff;
        sum_sq += diff * diff;
    }
    const double mean = sum / draws;
    const double var = draws > 1 ? std::max(sum_sq - draws * mean * mean, 0.0) / (draws - 1) : 0.0;
    const double se = std::sqrt(var / draws);
    report.observe(3.0 * se - std::abs(mean));
    report.note = "|mean| <= 3 SE";
    return report.finalize();
}

// ----------------------------------------------------------------- run_all

RunConfig default_verify_run() {
    RunConfig cfg;
    cfg.env = EnvSpec{4, 2, 3, 3, 6, {}};
    cfg.prior = PriorSpec{PosteriorKind::discrete, 8, 1.0, 12};
    cfg.agent = AgentKind::psrl;
    cfg.episodes = 200;
    cfg.replications = 20;
    cfg.seed = 13;
    cfg.keep_trace = true;
    return cfg;
}

namespace {

struct RandomInstance {
    LinearMixtureMDP truth;
    LinearMixtureMDP virtual_model;
    Policy policy;
};

RandomInstance random_instance(Rng& rng, int max_states, int max_actions, int max_horizon,
                               int max_dim, bool allow_improper) {
    const int states = 1 + rng.index(max_states);
    const int actions = 1 + rng.index(max_actions);
    const int horizon = 1 + rng.index(max_horizon);
    const int dim = 1 + rng.index(max_dim);
    LinearMixtureMDP truth =
        make_simplex_mixture_env(states, actions, horizon, dim, rng.engine()());
    const double c = truth.features().simplex_scale();
    ParameterSet other;
    const bool improper = allow_improper && rng.uniform() < 0.5;
    for (int h = 0; h < horizon; ++h) {
        Vec theta = c * rng.simplex(dim);
        if (improper) {
            for (int k = 0; k < dim; ++k) theta(k) += 0.5 * c * rng.normal();
        }
        other.theta.push_back(theta);
    }
    LinearMixtureMDP virtual_model = truth.with_parameters(std::move(other));
    Policy policy(horizon, states);
    for (int h = 0; h < horizon; ++h) {
        for (int s = 0; s < states; ++s) policy.set(h, s, rng.index(actions));
    }
    return {std::move(truth), std::move(virtual_model), std::move(policy)};
}

}  // namespace

std::vector<CheckReport> run_all(const VerifyConfig& cfg) {
    auto rng_for = [&](int tag) { return Rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(tag), StreamTag::verifier)); };

    // The posterior checks share one traced run.
    RunConfig run_cfg = cfg.run;
    run_cfg.keep_trace = true;
    run_cfg.normalization = cfg.fault;
    run_cfg.prior.kind = PosteriorKind::discrete;
    run_cfg.agent = AgentKind::psrl;
    run_cfg.jobs = cfg.jobs;
    const bool posterior_checks = run_cfg.episodes > 0 && run_cfg.replications > 0;
    std::optional<Experiment> exp;
    std::vector<ReplicationResult> runs;
    if (posterior_checks) {
        exp = build_experiment(run_cfg);
        runs = run_replications(*exp, run_cfg);
    }

    std::vector<std::function<CheckReport()>> checks;
    checks.push_back([&] {
        Rng rng = rng_for(1);
        return check_potential_lemma(cfg.potential_trials, cfg.potential_d_max, rng);
    });
    checks.push_back([&] {
        Rng rng = rng_for(2);
        std::vector<DecouplingFamily> families;
        for (int i = 0; i < cfg.decoupling_families; ++i) {
            families.push_back(random_decoupling_family(rng, 4, 5, i % 4));
        }
        return check_decoupling(families);
    });
    checks.push_back([&] {
        Rng rng = rng_for(3);
        CheckReport report("simulation_lemma", CheckMode::exact, 1e-9);
        for (int i = 0; i < cfg.identity_instances; ++i) {
            const auto inst = random_instance(rng, 4, 3, 4, 4, true);
            report.absorb(check_simulation_lemma(inst.truth, inst.virtual_model, inst.policy));
            // Small instances also check the per-stage conditional form.
            const auto small = random_instance(rng, 3, 3, 3, 4, true);
            report.absorb(check_simulation_history(small.truth, small.virtual_model, small.policy));
        }
        return report.finalize();
    });
    checks.push_back([&] {
        Rng rng = rng_for(4);
        CheckReport report("ltv", CheckMode::exact, 1e-9);
        for (int i = 0; i < cfg.identity_instances; ++i) {
            const auto inst = random_instance(rng, 4, 3, 4, 4, false);
            report.absorb(check_ltv(inst.truth, inst.policy));
        }
        return report.finalize();
    });
    checks.push_back([&] {
        Rng rng = rng_for(5);
        CheckReport report("variance_difference", CheckMode::exact, 1e-9);
        for (int i = 0; i < cfg.identity_instances; ++i) {
            const auto inst = random_instance(rng, 4, 3, 4, 4, false);
            const Dims& d = inst.truth.dims();
            for (int h = 0; h < d.horizon; ++h) {
                for (int s = 0; s < d.states; ++s) {
                    for (int a = 0; a < d.actions; ++a) {
                        report.absorb(check_variance_difference(inst.truth, inst.virtual_model,
                                                                inst.policy, {h, s, a}));
                    }
                }
            }
        }
        return report.finalize();
    });
    checks.push_back([&] {
        Rng rng = rng_for(6);
        CheckReport report("estimation_decomposition", CheckMode::exact, 1e-9);
        for (int i = 0; i < cfg.identity_instances; ++i) {
            RunConfig small;
            small.env = EnvSpec{1 + rng.index(4), 1 + rng.index(3), 1 + rng.index(4),
                                1 + rng.index(4), rng.engine()(), {}};
            small.prior = PriorSpec{PosteriorKind::discrete, 1 + rng.index(6), rng.uniform(0.05, 1.0),
                                    rng.engine()()};
            small.episodes = 4;
            small.replications = 1;
            small.seed = rng.engine()();
            small.keep_trace = true;
            const Experiment e = build_experiment(small);
            report.absorb(check_estimation_decomposition(e, run_replication(e, small, 0)));
        }
        return report.finalize();
    });
    if (posterior_checks) {
        checks.push_back([&] { return check_variance_reduction(*exp, run_cfg, runs); });
        checks.push_back([&] { return check_sherman_morrison_form(*exp, run_cfg, runs); });
        checks.push_back([&] {
            Rng rng = rng_for(9);
            CheckReport report("pessimism_zero", CheckMode::monte_carlo, 0.0);
            report.absorb(check_pessimism_zero(exp->prior, exp->structure, cfg.pessimism_draws, rng));
            const auto& trace = runs.front().trace;
            for (int k = 1; k <= cfg.pessimism_snapshots; ++k) {
                const std::size_t ep = trace.size() * k / (cfg.pessimism_snapshots + 1);
                const auto& post = std::get<DiscretePosterior>(trace[ep].posterior);
                report.absorb(check_pessimism_zero(post, exp->structure, cfg.pessimism_draws, rng));
            }
            report.note = "|mean| <= 3 SE at the prior and mid-run snapshots";
            return report.finalize();
        });
    }

    std::vector<CheckReport> reports(checks.size());
    parallel_for(static_cast<int>(checks.size()), cfg.jobs, [&](int i) { reports[i] = checks[i](); });
    return reports;
}

std::string format_report_table(const std::vector<CheckReport>& reports) {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof line, "%-26s %-12s %10s %14s %s\n", "name", "mode", "instances",
                  "worst_slack", "pass");
    out += line;
    for (const auto& r : reports) {
        std::snprintf(line, sizeof line, "%-26s %-12s %10ld %14.6e %s\n", r.name.c_str(),
                      to_string(r.mode).c_str(), r.instances,
                      r.instances > 0 ? r.worst_slack : 0.0, r.pass ? "PASS" : "FAIL");
        out += line;
    }
    return out;
}

nlohmann::json reports_to_json(const std::vector<CheckReport>& reports) {
    auto arr = nlohmann::json::array();
    for (const auto& r : reports) {
        nlohmann::json j;
        j["name"] = r.name;
        j["mode"] = to_string(r.mode);
        j["instances"] = r.instances;
        j["skipped"] = r.skipped;
        j["worst_slack"] = r.instances > 0 ? nlohmann::json(r.worst_slack) : nlohmann::json(nullptr);
        j["tolerance"] = r.tolerance;
        j["pass"] = r.pass;
        j["note"] = r.note;
        arr.push_back(j);
    }
    return nlohmann::json{{"checks", arr},
                          {"all_pass", std::all_of(reports.begin(), reports.end(),
                                                   [](const CheckReport& r) { return r.pass; })}};
}

}  // namespace linmix
