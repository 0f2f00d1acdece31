#include "linmix/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "linmix/linalg.hpp"
#include "linmix/parallel.hpp"

namespace linmix {

void RunConfig::validate() const {
    if (episodes < 1) throw std::invalid_argument("run.episodes must be >= 1");
    if (replications < 1) throw std::invalid_argument("run.replications must be >= 1");
    if (prior.atoms < 1) throw std::invalid_argument("prior.atoms must be >= 1");
    if (!(prior.scale > 0.0 && prior.scale <= 1.0)) {
        throw std::invalid_argument("prior.scale must lie in (0, 1]");
    }
    if (env.file.empty() &&
        (env.states < 1 || env.actions < 1 || env.horizon < 1 || env.dim < 1)) {
        throw std::invalid_argument("env sizes must be positive");
    }
    if (jobs < 0) throw std::invalid_argument("jobs must be >= 0");
}

Experiment build_experiment(const RunConfig& cfg) {
    cfg.validate();
    LinearMixtureMDP env = cfg.env.file.empty()
                               ? make_simplex_mixture_env(cfg.env.states, cfg.env.actions,
                                                          cfg.env.horizon, cfg.env.dim, cfg.env.seed)
                               : load_environment(cfg.env.file);
    DiscretePosterior prior = make_discrete_prior(env.structure()->features, cfg.prior.atoms,
                                                  cfg.prior.seed, cfg.prior.scale);
    Posterior initial = cfg.prior.kind == PosteriorKind::discrete
                            ? Posterior(prior)
                            : Posterior(GaussianPosterior::moment_matched(prior));
    return Experiment{env.structure(), std::move(prior), std::move(initial),
                      env.parameters().norm_bound};
}

namespace {

StateId draw_state(Rng& rng, std::span<const double> p) { return rng.categorical(p); }

std::span<const double> as_span(const Vec& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace

ReplicationResult run_replication(const Experiment& exp, const RunConfig& cfg, int replication) {
    const Dims& d = exp.structure->dims();
    Rng env_rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(replication), StreamTag::environment));
    Rng alg_rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(replication), StreamTag::algorithm));
    const double sig_min = sigma_min(cfg.sigma_min_rule, d.horizon, d.dim);

    ReplicationResult out;
    out.replication = replication;
    out.truth = exp.prior.sample(env_rng);
    out.truth.norm_bound = exp.norm_bound;
    const LinearMixtureMDP truth(exp.structure, out.truth);
    const Plan optimal = value_iteration(truth);
    out.optimal_value = expected_value(truth, optimal.values);
    out.stage_potential.assign(d.horizon, 0.0);

    Posterior posterior = exp.initial_posterior;
    double cum = 0.0;
    for (int episode = 1; episode <= cfg.episodes; ++episode) {
        EpisodePlan plan = act_episode(cfg.agent, posterior, exp.structure, alg_rng, &out.truth);
        out.clamped_entries += plan.values.clamped;
        if (plan.improper) ++out.improper_samples;

        const double v_true = expected_value(truth, plan.policy);
        const double v_virtual = expected_value(plan.virtual_model, plan.policy);

        RegretRecord rec;
        rec.replication = replication;
        rec.episode = episode;
        rec.regret = out.optimal_value - v_true;
        rec.pessimism = out.optimal_value - v_virtual;
        rec.estimation_error = v_virtual - v_true;
        cum += rec.regret;
        rec.cum_regret = cum;
        rec.improper = plan.improper;

        std::vector<StateId> states{draw_state(env_rng, as_span(exp.structure->rho))};
        std::vector<ActionId> actions;
        std::vector<ValueTargetRecord> targets;
        std::vector<double> sigma_bar_sq;
        for (int h = 0; h < d.horizon; ++h) {
            const StateId s = states.back();
            const ActionId a = plan.policy(h, s);
            const Step x{h, s, a};
            const StateId next = draw_state(env_rng, truth.kernel(x));
            actions.push_back(a);
            states.push_back(next);

            const auto v_next = plan.values.stage(h + 1);
            ValueTargetRecord target{h, s, a, next, value_feature(*exp.structure->features, x, v_next),
                                     v_next[next]};
            const ValueVariance var = expected_value_variance(posterior, x, v_next, sig_min);
            const Mat gamma = covariance(posterior, h);
            const double potential =
                std::min(1.0, target.feature.dot(gamma * target.feature) / var.sigma_bar_sq);
            rec.sum_sigma_bar_sq += var.sigma_bar_sq;
            rec.sum_potential += potential;
            out.stage_potential[h] += potential;
            sigma_bar_sq.push_back(var.sigma_bar_sq);
            targets.push_back(std::move(target));
        }
        out.records.push_back(rec);

        if (cfg.keep_trace) {
            out.trace.push_back(EpisodeTrace{posterior, plan.sampled, plan.virtual_model.parameters(),
                                             plan.policy, plan.values, states, actions, targets});
        }

        if (auto* disc = std::get_if<DiscretePosterior>(&posterior)) {
            for (int h = 0; h < d.horizon; ++h) {
                disc->update({h, states[h], actions[h]}, states[h + 1], cfg.normalization);
            }
        } else {
            auto& gauss = std::get<GaussianPosterior>(posterior);
            for (std::size_t h = 0; h < targets.size(); ++h) gauss.update(targets[h], sigma_bar_sq[h]);
        }
    }
    return out;
}

std::vector<ReplicationResult> run_replications(const Experiment& exp, const RunConfig& cfg) {
    std::vector<ReplicationResult> results(cfg.replications);
    parallel_for(cfg.replications, cfg.jobs,
                 [&](int r) { results[r] = run_replication(exp, cfg, r); });
    return results;
}

std::vector<int> default_checkpoints(int episodes) {
    std::vector<int> out;
    for (int c : {episodes / 4, episodes / 2, episodes}) {
        c = std::max(c, 1);
        if (out.empty() || out.back() != c) out.push_back(c);
    }
    return out;
}

std::vector<CheckpointStat> bayes_regret(const std::vector<ReplicationResult>& results,
                                         const std::vector<int>& checkpoints) {
    std::vector<CheckpointStat> out;
    const double n = static_cast<double>(results.size());
    for (int ep : checkpoints) {
        double sum = 0.0;
        double sum_sq = 0.0;
        for (const auto& r : results) {
            if (ep < 1 || ep > static_cast<int>(r.records.size())) {
                throw std::out_of_range("checkpoint beyond the simulated episodes");
            }
            const double v = r.records[ep - 1].cum_regret;
            sum += v;
            sum_sq += v * v;
        }
        CheckpointStat stat;
        stat.episode = ep;
        stat.mean = sum / n;
        const double var = n > 1 ? std::max(sum_sq - n * stat.mean * stat.mean, 0.0) / (n - 1) : 0.0;
        stat.std_error = std::sqrt(var / n);
        stat.ci_low = stat.mean - 1.96 * stat.std_error;
        stat.ci_high = stat.mean + 1.96 * stat.std_error;
        out.push_back(stat);
    }
    return out;
}

double theorem1_bound(const std::vector<Mat>& prior_covariances, int dim, int horizon, int episodes) {
    double log_dets = 0.0;
    for (const Mat& gamma : prior_covariances) log_dets += log_det_i_plus(gamma, episodes);
    const double h = horizon;
    return std::sqrt(2.0 * dim * h * h * h * episodes * log_dets);
}

double theorem1_bound(const Posterior& prior, int dim, int horizon, int episodes) {
    std::vector<Mat> covs;
    for (int h = 0; h < horizon; ++h) covs.push_back(covariance(prior, h));
    return theorem1_bound(covs, dim, horizon, episodes);
}

double prior_free_bound(int dim, int horizon, int episodes, double norm_bound) {
    const double h = horizon;
    return std::sqrt(2.0) * dim *
           std::sqrt(h * h * h * h * episodes * std::log1p(episodes * norm_bound * norm_bound));
}

std::vector<RegretRecord> collect_records(const std::vector<ReplicationResult>& results) {
    std::vector<RegretRecord> all;
    for (const auto& r : results) all.insert(all.end(), r.records.begin(), r.records.end());
    std::stable_sort(all.begin(), all.end(), [](const RegretRecord& a, const RegretRecord& b) {
        return std::tie(a.replication, a.episode) < std::tie(b.replication, b.episode);
    });
    return all;
}

namespace {

const std::vector<std::string>& csv_columns() {
    static const std::vector<std::string> cols = {
        "replication", "episode", "regret", "cum_regret", "pessimism", "estimation_error",
        "sum_sigma_bar_sq", "sum_potential", "improper_flag"};
    return cols;
}

void append_double(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

[[noreturn]] void parse_error(int line, const std::string& what) {
    throw std::runtime_error("csv line " + std::to_string(line) + ": " + what);
}

template <typename T>
T parse_field(const std::string& text, int line, const std::string& column) {
    T value{};
    const auto* end = text.data() + text.size();
    const auto res = std::from_chars(text.data(), end, value);
    if (res.ec != std::errc{} || res.ptr != end) {
        parse_error(line, "cannot parse column '" + column + "' value '" + text + "'");
    }
    return value;
}

}  // namespace

std::string format_csv(const std::vector<RegretRecord>& records) {
    std::string out = kCsvHeader;
    out += '\n';
    for (const auto& r : records) {
        out += std::to_string(r.replication);
        out += ',';
        out += std::to_string(r.episode);
        for (double v : {r.regret, r.cum_regret, r.pessimism, r.estimation_error, r.sum_sigma_bar_sq,
                         r.sum_potential}) {
            out += ',';
            append_double(out, v);
        }
        out += r.improper ? ",1\n" : ",0\n";
    }
    return out;
}

void write_csv(const std::vector<RegretRecord>& records, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << format_csv(records);
}

std::vector<RegretRecord> parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) parse_error(1, "missing header row");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split(line);
    for (const auto& col : csv_columns()) {
        if (std::find(header.begin(), header.end(), col) == header.end()) {
            parse_error(1, "missing column '" + col + "'");
        }
    }
    if (header != csv_columns()) {
        for (const auto& col : header) {
            if (std::find(csv_columns().begin(), csv_columns().end(), col) == csv_columns().end()) {
                parse_error(1, "unexpected column '" + col + "'");
            }
        }
        parse_error(1, "columns out of order");
    }
    std::vector<RegretRecord> records;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split(line);
        if (f.size() != csv_columns().size()) {
            parse_error(lineno, "expected " + std::to_string(csv_columns().size()) + " fields, got " +
                                    std::to_string(f.size()));
        }
        const auto& c = csv_columns();
        RegretRecord r;
        r.replication = parse_field<int>(f[0], lineno, c[0]);
        r.episode = parse_field<int>(f[1], lineno, c[1]);
        r.regret = parse_field<double>(f[2], lineno, c[2]);
        r.cum_regret = parse_field<double>(f[3], lineno, c[3]);
        r.pessimism = parse_field<double>(f[4], lineno, c[4]);
        r.estimation_error = parse_field<double>(f[5], lineno, c[5]);
        r.sum_sigma_bar_sq = parse_field<double>(f[6], lineno, c[6]);
        r.sum_potential = parse_field<double>(f[7], lineno, c[7]);
        const int flag = parse_field<int>(f[8], lineno, c[8]);
        if (flag != 0 && flag != 1) parse_error(lineno, "improper_flag must be 0 or 1");
        r.improper = flag == 1;
        records.push_back(r);
    }
    return records;
}

std::vector<RegretRecord> read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str());
}

}  // namespace linmix
