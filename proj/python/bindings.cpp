#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "linmix/config.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

// JSON crosses the boundary as text; the Python package decodes it.

std::string make_env(int states, int actions, int horizon, int dim, std::uint64_t seed) {
    return linmix::environment_to_json(
               linmix::make_simplex_mixture_env(states, actions, horizon, dim, seed))
        .dump();
}

std::string assumption1(const std::string& env_text) {
    const auto env = linmix::environment_from_json(json::parse(env_text));
    const auto report = linmix::check_assumption1(env.features());
    return json{{"pass", report.pass},
                {"worst", report.worst},
                {"mode", report.mode == linmix::Assumption1Mode::vertex_enumeration
                             ? "vertex_enumeration"
                             : "sufficient_condition"}}
        .dump();
}

std::string plan(const std::string& env_text) {
    const auto env = linmix::environment_from_json(json::parse(env_text));
    const auto p = linmix::value_iteration(env);
    const auto& d = env.dims();
    json policy = json::array();
    json values = json::array();
    for (int h = 0; h <= d.horizon; ++h) {
        json row = json::array();
        for (int s = 0; s < d.states; ++s) row.push_back(p.values.v(h, s));
        values.push_back(row);
        if (h == d.horizon) continue;
        json actions = json::array();
        for (int s = 0; s < d.states; ++s) actions.push_back(p.policy(h, s));
        policy.push_back(actions);
    }
    return json{{"policy", policy}, {"values", values},
                {"optimal_value", linmix::expected_value(env, p.values)}}
        .dump();
}

py::tuple run(const std::string& config_text) {
    const linmix::AppConfig app = linmix::config_from_json(json::parse(config_text));
    std::vector<linmix::ReplicationResult> results;
    double bound = 0.0;
    {
        py::gil_scoped_release release;
        const auto exp = linmix::build_experiment(app.run);
        results = linmix::run_replications(exp, app.run);
        const auto& d = exp.structure->dims();
        bound = linmix::theorem1_bound(exp.initial_posterior, d.dim, d.horizon, app.run.episodes);
    }
    json stats = json::array();
    for (const auto& s : linmix::bayes_regret(results, linmix::default_checkpoints(app.run.episodes))) {
        stats.push_back({{"episode", s.episode}, {"mean", s.mean}, {"std_error", s.std_error}});
    }
    json meta{{"theorem1_bound", bound}, {"checkpoints", stats}};
    return py::make_tuple(linmix::format_csv(linmix::collect_records(results)), meta.dump());
}

std::string verify(const std::string& config_text) {
    const linmix::AppConfig app = linmix::config_from_json(json::parse(config_text));
    std::vector<linmix::CheckReport> reports;
    {
        py::gil_scoped_release release;
        reports = linmix::run_all(app.verify);
    }
    return linmix::reports_to_json(reports).dump();
}

}  // namespace

PYBIND11_MODULE(_linmix, m) {
    m.doc() = "Posterior sampling workbench for linear mixture MDPs";

    m.def("make_env", &make_env, py::arg("states"), py::arg("actions"), py::arg("horizon"),
          py::arg("dim"), py::arg("seed"));
    m.def("check_assumption1", &assumption1, py::arg("env"));
    m.def("plan", &plan, py::arg("env"));
    m.def("run", &run, py::arg("config"));
    m.def("verify", &verify, py::arg("config"));
    m.def("default_config", [] { return linmix::config_to_json(linmix::AppConfig{}).dump(); });
    m.def("theorem1_bound",
          py::overload_cast<const std::vector<linmix::Mat>&, int, int, int>(&linmix::theorem1_bound),
          py::arg("prior_covariances"), py::arg("dim"), py::arg("horizon"), py::arg("episodes"));
    m.def("prior_free_bound", &linmix::prior_free_bound, py::arg("dim"), py::arg("horizon"),
          py::arg("episodes"), py::arg("norm_bound"));
}
