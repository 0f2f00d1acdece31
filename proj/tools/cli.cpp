#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "linmix/config.hpp"

namespace linmix::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "./out";
    std::optional<int> episodes;
    std::optional<int> replications;
    std::optional<int> jobs;
    bool quiet = false;
    std::string axis;
    std::vector<std::string> values;
};

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void ensure_out_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw UsageError("cannot create output directory '" + dir.string() + "'");
    }
    // Creating the directory may succeed on a read-only parent mount, so probe.
    const fs::path probe = dir / ".linmix-write-probe";
    {
        std::ofstream f(probe);
        if (!f) throw UsageError("output directory '" + dir.string() + "' is not writable");
    }
    fs::remove(probe, ec);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw UsageError("cannot write '" + path.string() + "'");
    f << text;
}

AppConfig resolve_config(const Options& opt, bool required) {
    if (required && opt.config.empty()) throw UsageError("--config is required");
    AppConfig cfg;
    if (!opt.config.empty()) {
        if (!fs::exists(opt.config)) throw UsageError("config file '" + opt.config + "' not found");
        cfg = load_config(opt.config);
    }
    apply_seed_env(cfg);
    if (opt.seed) cfg.run.seed = *opt.seed;
    if (opt.episodes) cfg.run.episodes = *opt.episodes;
    if (opt.replications) cfg.run.replications = *opt.replications;
    if (opt.jobs) {
        cfg.run.jobs = *opt.jobs;
        cfg.verify.jobs = *opt.jobs;
    }
    cfg.run.out_dir = opt.out;
    cfg.run.validate();
    return cfg;
}

json stats_json(const std::vector<CheckpointStat>& stats) {
    json arr = json::array();
    for (const auto& s : stats) {
        arr.push_back({{"episode", s.episode},
                       {"mean_cum_regret", s.mean},
                       {"std_error", s.std_error},
                       {"ci95_low", s.ci_low},
                       {"ci95_high", s.ci_high}});
    }
    return arr;
}

struct RunOutcome {
    std::vector<ReplicationResult> results;
    std::vector<CheckpointStat> stats;
    double theorem1 = 0.0;
    int identity_violations = 0;
    json metadata;
};

RunOutcome execute(const AppConfig& app) {
    const RunConfig& cfg = app.run;
    const Experiment exp = build_experiment(cfg);
    RunOutcome outcome;
    outcome.results = run_replications(exp, cfg);
    outcome.stats = bayes_regret(outcome.results, default_checkpoints(cfg.episodes));
    const Dims& d = exp.structure->dims();
    outcome.theorem1 = theorem1_bound(exp.initial_posterior, d.dim, d.horizon, cfg.episodes);

    long improper = 0;
    long clamped = 0;
    double sigma_total = 0.0;
    std::vector<double> stage_potential(d.horizon, 0.0);
    json seeds = json::array();
    for (const auto& r : outcome.results) {
        improper += r.improper_samples;
        clamped += r.clamped_entries;
        for (const auto& rec : r.records) {
            sigma_total += rec.sum_sigma_bar_sq;
            if (std::abs(rec.pessimism + rec.estimation_error - rec.regret) > 1e-10) {
                ++outcome.identity_violations;
            }
        }
        for (int h = 0; h < d.horizon; ++h) stage_potential[h] += r.stage_potential[h];
        seeds.push_back(
            {{"replication", r.replication},
             {"environment", derive_seed(cfg.seed, r.replication, StreamTag::environment)},
             {"algorithm", derive_seed(cfg.seed, r.replication, StreamTag::algorithm)}});
    }
    const double reps = static_cast<double>(outcome.results.size());
    for (double& p : stage_potential) p /= reps;

    json& m = outcome.metadata;
    m["config"] = config_to_json(app);
    m["dims"] = {{"S", d.states}, {"A", d.actions}, {"H", d.horizon}, {"d", d.dim}};
    m["total_steps"] = cfg.total_steps();
    m["seeds"] = {{"base", cfg.seed},
                  {"env_generator", cfg.env.seed},
                  {"prior_atoms", cfg.prior.seed},
                  {"replications", seeds}};
    m["improper_samples"] = improper;
    m["clamped_value_entries"] = clamped;
    m["clamping_triggered"] = clamped > 0;
    m["theorem1_bound"] = outcome.theorem1;
    m["prior_free_bound"] =
        exp.norm_bound ? json(prior_free_bound(d.dim, d.horizon, cfg.episodes, *exp.norm_bound))
                       : json(nullptr);
    m["sigma_min"] = sigma_min(cfg.sigma_min_rule, d.horizon, d.dim);
    m["mean_sum_sigma_bar_sq"] = sigma_total / reps;
    m["mean_stage_potential"] = stage_potential;
    m["checkpoints"] = stats_json(outcome.stats);
    m["regret_identity_violations"] = outcome.identity_violations;
    return outcome;
}

int cmd_make_env(const Options& opt, std::ostream& out) {
    AppConfig app = resolve_config(opt, false);
    if (opt.seed) app.run.env.seed = *opt.seed;
    const EnvSpec& e = app.run.env;
    const fs::path dir(opt.out);
    ensure_out_dir(dir);
    const LinearMixtureMDP env = make_simplex_mixture_env(e.states, e.actions, e.horizon, e.dim, e.seed);
    const fs::path path = dir / "environment.json";
    save_environment(env, path);
    const Assumption1Report a1 = check_assumption1(env.features());
    if (!opt.quiet) {
        out << "wrote " << path.string() << " (bounded features: " << (a1.pass ? "ok" : "VIOLATED")
            << ", worst norm " << a1.worst << ")\n";
    }
    return a1.pass ? kSuccess : kCheckFailed;
}

int cmd_run(const Options& opt, std::ostream& out, std::ostream& err) {
    const AppConfig app = resolve_config(opt, true);
    const fs::path dir(opt.out);
    ensure_out_dir(dir);
    const auto start = std::chrono::steady_clock::now();
    RunOutcome outcome = execute(app);
    write_csv(collect_records(outcome.results), dir / "regret.csv");
    write_text(dir / "metadata.json", outcome.metadata.dump(2) + "\n");
    write_text(dir / "config.json", config_to_json(app).dump(2) + "\n");
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!opt.quiet) {
        for (const auto& s : outcome.stats) {
            out << "L=" << s.episode << "  mean cumulative regret " << s.mean << " +/- "
                << s.std_error << "\n";
        }
        out << "regret bound " << outcome.theorem1 << "\n";
        err << "elapsed " << secs << " s\n";
    }
    if (outcome.identity_violations > 0) {
        err << "error: regret decomposition violated on " << outcome.identity_violations
            << " episodes\n";
        return kCheckFailed;
    }
    return kSuccess;
}

int cmd_sweep(const Options& opt, std::ostream& out, std::ostream& err) {
    const AppConfig base = resolve_config(opt, true);
    if (opt.axis.empty()) throw UsageError("sweep needs --axis (prior_scale, d, H or L)");
    if (opt.values.empty()) throw UsageError("sweep needs --values");
    if (opt.axis != "prior_scale" && opt.axis != "d" && opt.axis != "H" && opt.axis != "L") {
        throw UsageError("unknown sweep axis '" + opt.axis + "' (prior_scale, d, H or L)");
    }
    const fs::path dir(opt.out);
    ensure_out_dir(dir);
    std::ostringstream summary;
    summary << "axis,value,episodes,replications,mean_cum_regret,std_error,ci95_low,ci95_high,"
               "theorem1_bound\n";
    summary.precision(17);
    json points = json::array();
    int status = kSuccess;
    for (const std::string& raw : opt.values) {
        AppConfig app = base;
        try {
            std::size_t used = 0;
            if (opt.axis == "prior_scale") {
                app.run.prior.scale = std::stod(raw, &used);
            } else {
                const int v = std::stoi(raw, &used);
                if (opt.axis == "d") app.run.env.dim = v;
                if (opt.axis == "H") app.run.env.horizon = v;
                if (opt.axis == "L") app.run.episodes = v;
            }
            if (used != raw.size()) throw std::invalid_argument(raw);
        } catch (const std::logic_error&) {
            throw UsageError("bad sweep value '" + raw + "'");
        }
        if (opt.axis != "prior_scale" && opt.axis != "L" && !app.run.env.file.empty()) {
            throw UsageError("cannot sweep d or H with an environment file");
        }
        try {
            app.run.validate();
        } catch (const std::exception& e) {
            throw UsageError(e.what());
        }
        RunOutcome outcome = execute(app);
        write_csv(collect_records(outcome.results), dir / ("regret_" + opt.axis + "_" + raw + ".csv"));
        const CheckpointStat& last = outcome.stats.back();
        summary << opt.axis << ',' << raw << ',' << app.run.episodes << ','
                << app.run.replications << ',' << last.mean << ',' << last.std_error << ','
                << last.ci_low << ',' << last.ci_high << ',' << outcome.theorem1 << '\n';
        outcome.metadata["sweep"] = {{"axis", opt.axis}, {"value", raw}};
        points.push_back(outcome.metadata);
        if (!opt.quiet) {
            out << opt.axis << "=" << raw << "  mean cumulative regret " << last.mean << " +/- "
                << last.std_error << "  (bound " << outcome.theorem1 << ")\n";
        }
        if (outcome.identity_violations > 0) {
            err << "error: regret decomposition violated at " << opt.axis << "=" << raw << "\n";
            status = kCheckFailed;
        }
    }
    write_text(dir / "summary.csv", summary.str());
    write_text(dir / "metadata.json", json{{"points", points}}.dump(2) + "\n");
    return status;
}

int cmd_verify(const Options& opt, std::ostream& out) {
    AppConfig app = resolve_config(opt, false);
    if (opt.seed) app.verify.seed = *opt.seed;
    const fs::path dir(opt.out);
    ensure_out_dir(dir);
    const auto reports = run_all(app.verify);
    if (!opt.quiet) out << format_report_table(reports);
    json report = reports_to_json(reports);
    report["config"] = config_to_json(app)["verify"];
    write_text(dir / "verify_report.json", report.dump(2) + "\n");
    return report["all_pass"].get<bool>() ? kSuccess : kCheckFailed;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Posterior sampling workbench for linear mixture MDPs", "linmix"};
    app.require_subcommand(1, 1);
    Options opt;
    auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* c = sub->add_option("--config", opt.config, "JSON configuration file");
        if (config_required) c->required();
        sub->add_option("--seed", opt.seed, "base seed (overrides config and LINMIX_SEED)");
        sub->add_option("--out", opt.out, "output directory")->capture_default_str();
        sub->add_option("--episodes", opt.episodes, "episodes per replication")
            ->check(CLI::PositiveNumber);
        sub->add_option("--replications", opt.replications, "number of replications")
            ->check(CLI::PositiveNumber);
        sub->add_option("--jobs", opt.jobs, "worker threads (0: one per logical processor)")
            ->check(CLI::NonNegativeNumber);
        sub->add_flag("--quiet", opt.quiet, "suppress progress output");
    };
    add_common(app.add_subcommand("make-env", "generate an environment file"), false);
    add_common(app.add_subcommand("run", "run replications and write regret.csv"), true);
    auto* sweep = app.add_subcommand("sweep", "vary one axis and write one CSV per point");
    add_common(sweep, true);
    sweep->add_option("--axis", opt.axis, "prior_scale, d, H or L")->required();
    sweep->add_option("--values", opt.values, "comma-separated axis values")
        ->required()
        ->delimiter(',');
    add_common(app.add_subcommand("verify", "run the verifier suite"), false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kSuccess;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        if (name == "make-env") return cmd_make_env(opt, out);
        if (name == "run") return cmd_run(opt, out, err);
        if (name == "sweep") return cmd_sweep(opt, out, err);
        return cmd_verify(opt, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kCheckFailed;
    }
}

}  // namespace linmix::cli
