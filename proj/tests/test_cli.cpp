#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "linmix/config.hpp"

using namespace linmix;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result call(std::vector<std::string> args) {
    args.insert(args.begin(), "linmix");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("linmix_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), {}};
}

fs::path write_config(const fs::path& dir, const std::string& text) {
    const fs::path p = dir / "config.in.json";
    std::ofstream(p) << text;
    return p;
}

const char* kSmall = R"({"env": {"states": 3, "horizon": 2, "dim": 2, "seed": 5},
                         "prior": {"atoms": 4},
                         "run": {"episodes": 20, "replications": 3, "seed": 77}})";

}  // namespace

TEST_CASE("config parsing") {
    const AppConfig def = config_from_json(nlohmann::json::object());
    CHECK(def.run.episodes == 400);
    CHECK(config_to_json(config_from_json(config_to_json(def))) == config_to_json(def));
    CHECK_THROWS_WITH_AS(config_from_json(nlohmann::json::parse(R"({"run": {"episode": 3}})")),
                         doctest::Contains("run.episode"), ConfigError);
    CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"runs": {}})")), ConfigError);
    CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"run": {"episodes": "many"}})")), ConfigError);
    CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"run": {"seed": -1}})")), ConfigError);
    CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"agent": {"kind": "ucrl"}})")), ConfigError);
    const AppConfig big = config_from_json(nlohmann::json::parse(R"({"run": {"seed": 18446744073709551615}})"));
    CHECK(big.run.seed == 18446744073709551615ull);
    const AppConfig v = config_from_json(nlohmann::json::parse(R"({"env": {"dim": 2}, "verify": {"episodes": 7}})"));
    CHECK(v.verify.run.env.dim == 2);
    CHECK(v.verify.run.episodes == 7);
}

TEST_CASE("seed override from the environment") {
    AppConfig cfg;
    setenv("LINMIX_SEED", "4242", 1);
    apply_seed_env(cfg);
    CHECK(cfg.run.seed == 4242);
    setenv("LINMIX_SEED", "x1", 1);
    CHECK_THROWS_AS(apply_seed_env(cfg), ConfigError);
    unsetenv("LINMIX_SEED");
}

TEST_CASE("usage errors exit 1 with a one-line diagnostic") {
    const fs::path dir = scratch("usage");
    const auto cfg = write_config(dir, kSmall).string();
    CHECK(call({}).code == 1);
    auto r = call({"run", "--config", cfg, "--bogus"});
    CHECK(r.code == 1);
    CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
    CHECK(call({"run"}).code == 1);
    CHECK(call({"run", "--config", (dir / "missing.json").string()}).code == 1);
    CHECK(call({"run", "--config", cfg, "--out", "/proc/linmix_cannot_write"}).code == 1);
    CHECK(call({"sweep", "--config", cfg, "--axis", "gamma", "--values", "1", "--out", dir.string()}).code == 1);
    CHECK(call({"run", "--config", write_config(dir, R"({"env": {"colour": 1}})").string()}).code == 1);
}

TEST_CASE("run is byte-deterministic and the echoed config reproduces it") {
    const fs::path dir = scratch("run");
    const auto cfg = write_config(dir, kSmall).string();
    REQUIRE(call({"run", "--config", cfg, "--out", (dir / "a").string(), "--quiet"}).code == 0);
    REQUIRE(call({"run", "--config", cfg, "--out", (dir / "b").string(), "--quiet", "--jobs", "3"}).code == 0);
    const std::string a = slurp(dir / "a" / "regret.csv");
    CHECK(a == slurp(dir / "b" / "regret.csv"));
    CHECK(slurp(dir / "a" / "metadata.json") == slurp(dir / "b" / "metadata.json"));
    CHECK(std::count(a.begin(), a.end(), '\n') == 1 + 20 * 3);

    REQUIRE(call({"run", "--config", (dir / "a" / "config.json").string(), "--out", (dir / "c").string(), "--quiet"}).code == 0);
    CHECK(slurp(dir / "c" / "regret.csv") == a);

    REQUIRE(call({"run", "--config", cfg, "--seed", "78", "--out", (dir / "d").string(), "--quiet"}).code == 0);
    CHECK(slurp(dir / "d" / "regret.csv") != a);
    REQUIRE(call({"run", "--config", cfg, "--episodes", "8", "--replications", "2", "--out", (dir / "e").string(), "--quiet"}).code == 0);
    const std::string e = slurp(dir / "e" / "regret.csv");
    CHECK(std::count(e.begin(), e.end(), '\n') == 1 + 8 * 2);

    const auto meta = nlohmann::json::parse(slurp(dir / "a" / "metadata.json"));
    CHECK(meta["config"]["run"]["seed"] == 77);
    CHECK(meta["theorem1_bound"].get<double>() > 0.0);
    CHECK(meta.contains("improper_samples"));
    CHECK(meta["seeds"]["replications"].size() == 3);
}

TEST_CASE("sweep writes one CSV per point and a summary") {
    const fs::path dir = scratch("sweep");
    const auto cfg = write_config(dir, kSmall).string();
    auto r = call({"sweep", "--config", cfg, "--axis", "prior_scale", "--values", "0.01,0.1,1", "--out", dir.string(), "--quiet"});
    REQUIRE(r.code == 0);
    for (const char* v : {"0.01", "0.1", "1"}) CHECK(fs::exists(dir / (std::string("regret_prior_scale_") + v + ".csv")));
    const std::string summary = slurp(dir / "summary.csv");
    CHECK(std::count(summary.begin(), summary.end(), '\n') == 4);
    CHECK(summary.rfind("axis,value,episodes", 0) == 0);
    REQUIRE(call({"sweep", "--config", cfg, "--axis", "d", "--values", "1,3", "--out", (dir / "d").string(), "--quiet"}).code == 0);
    REQUIRE(call({"sweep", "--config", cfg, "--axis", "L", "--values", "4,8", "--out", (dir / "L").string(), "--quiet"}).code == 0);
    CHECK(call({"sweep", "--config", cfg, "--axis", "H", "--values", "x", "--out", (dir / "H").string(), "--quiet"}).code == 1);
}

TEST_CASE("verify and make-env") {
    const fs::path dir = scratch("verify");
    const auto cfg = write_config(dir, R"({"verify": {"identity_instances": 3, "potential_trials": 100,
        "decoupling_families": 5, "pessimism_draws": 200, "pessimism_snapshots": 1, "episodes": 6, "replications": 2}})");
    auto r = call({"verify", "--config", cfg.string(), "--out", dir.string()});
    CHECK(r.code == 0);
    CHECK(r.out.find("name") == 0);
    const auto report = nlohmann::json::parse(slurp(dir / "verify_report.json"));
    CHECK(report["all_pass"] == true);
    CHECK(report["checks"].size() == 9);

    r = call({"make-env", "--out", dir.string(), "--seed", "7"});
    CHECK(r.code == 0);
    const auto env = load_environment(dir / "environment.json");
    CHECK(environment_to_json(env).dump() == environment_to_json(make_simplex_mixture_env(4, 2, 3, 3, 7)).dump());

    // runs can use an environment file
    const auto with_file = write_config(dir, R"({"env": {"file": ")" + (dir / "environment.json").string() +
                                                 R"("}, "run": {"episodes": 5, "replications": 2}})");
    CHECK(call({"run", "--config", with_file.string(), "--out", (dir / "f").string(), "--quiet"}).code == 0);
}
