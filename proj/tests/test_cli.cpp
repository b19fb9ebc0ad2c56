#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include "spi/cli.hpp"

#include "oracles.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Scoped override of the output-root environment variable.
struct EnvGuard {
  std::string saved;
  bool had = false;
  explicit EnvGuard(const fs::path& value) {
    if (const char* old = std::getenv(spi::kOutputRootEnv)) {
      saved = old;
      had = true;
    }
    setenv(spi::kOutputRootEnv, value.string().c_str(), 1);
  }
  ~EnvGuard() {
    if (had)
      setenv(spi::kOutputRootEnv, saved.c_str(), 1);
    else
      unsetenv(spi::kOutputRootEnv);
  }
};

fs::path fresh_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("spi_cli_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

json minimal_race_config() {
  return json{{"config_version", 1},
              {"name", "mini"},
              {"objective", "f1"},
              {"start", {-2.0, 1.0}},
              {"max_steps", 40},
              {"optimizers",
               {{{"label", "gd"}, {"kind", "sgd"}, {"hyper", {{"r", 0.012}}}},
                {{"label", "spi"},
                 {"kind", "spi"},
                 {"hyper", {{"r", 0.012}, {"alpha", 0.9}}}}}}};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SPI_BENCH_BIN) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("doubles render as shortest round-trip decimals") {
  CHECK(spi::fmt_double(0.012) == "0.012");
  CHECK(spi::fmt_double(1.0) == "1");
  CHECK(spi::fmt_double(-0.5) == "-0.5");
  CHECK(spi::fmt_double(1e-05) == "1e-05");
  CHECK(spi::fmt_double(0.1 + 0.2) == "0.30000000000000004");
  // round-trips exactly
  const double v = 0.1234567890123456789;
  CHECK(std::stod(spi::fmt_double(v)) == v);
  CHECK(spi::fmt_double(std::nan("")) == "nan");
}

TEST_CASE("output root env var re-roots configured paths") {
  const fs::path root = fresh_dir("envroot");
  {
    EnvGuard guard(root);
    CHECK(spi::resolve_output_dir("out/x/csv") == root / "out/x/csv");
    CHECK(spi::resolve_output_dir("/abs/path") == root / "abs/path");
  }
  unsetenv(spi::kOutputRootEnv);
  CHECK(spi::resolve_output_dir("out/x/csv") == fs::path("out/x/csv"));
}

TEST_CASE("experiment config parsing accepts the documented dialect") {
  const auto cfg = spi::parse_experiment_config(minimal_race_config());
  CHECK(cfg.name == "mini");
  CHECK(cfg.objective.name == "f1");
  CHECK(cfg.start == spi::ParamVector{-2.0, 1.0});
  CHECK(cfg.max_steps == 40);
  CHECK(cfg.metrics.settle_tol == 1e-2);
  CHECK(cfg.metrics.hit_tol == 1e-5);
  REQUIRE(cfg.optimizers.size() == 2);
  CHECK(cfg.optimizers[0].kind == spi::OptimizerKind::SGD);
  CHECK(cfg.optimizers[1].hyper.at("alpha") == 0.9);
  // defaults
  CHECK(cfg.csv_dir == "out/mini/csv");

  // inline quadratic objective and the "inf" spelling for beta
  json q = minimal_race_config();
  q["objective"] = {{"quadratic", {{"diag", {1.0, 50.0}}, {"center", {0.0, 0.0}}}}};
  q["optimizers"] = {{{"label", "ci"},
                      {"kind", "ci"},
                      {"hyper", {{"r", 0.01}, {"alpha", 0.9}, {"beta", "inf"}}}}};
  const auto qc = spi::parse_experiment_config(q);
  CHECK(qc.objective.dimension == 2);
  CHECK(std::isinf(qc.optimizers[0].hyper.at("beta")));
}

TEST_CASE("experiment config parsing rejects malformed input") {
  json bad = minimal_race_config();
  bad.erase("config_version");
  CHECK_THROWS_AS(spi::parse_experiment_config(bad), spi::ConfigError);
  bad = minimal_race_config();
  bad["config_version"] = 2;
  CHECK_THROWS_AS(spi::parse_experiment_config(bad), spi::ConfigError);
  bad = minimal_race_config();
  bad["objective"] = "f17";
  CHECK_THROWS_AS(spi::parse_experiment_config(bad), spi::ConfigError);
  bad = minimal_race_config();
  bad["start"] = {1.0};
  CHECK_THROWS_AS(spi::parse_experiment_config(bad), spi::ConfigError);
  bad = minimal_race_config();
  bad["optimizers"] = json::array();
  CHECK_THROWS_AS(spi::parse_experiment_config(bad), spi::ConfigError);
  bad = minimal_race_config();
  bad["optimizers"][1]["label"] = "gd";  // duplicate
  CHECK_THROWS_AS(spi::parse_experiment_config(bad), spi::ConfigError);
  bad = minimal_race_config();
  bad["optimizers"][0]["kind"] = "newton";
  CHECK_THROWS_AS(spi::parse_experiment_config(bad), spi::ConfigError);
  bad = minimal_race_config();
  bad["optimizers"][0]["hyper"]["r"] = "fast";
  CHECK_THROWS_AS(spi::parse_experiment_config(bad), spi::ConfigError);
  CHECK_THROWS_AS(spi::load_experiment_config("/nonexistent/cfg.json"),
                  spi::ConfigError);
}

TEST_CASE("run_experiment writes csvs, summary, and well-formed svgs") {
  const fs::path root = fresh_dir("race");
  EnvGuard guard(root);
  spi::run_experiment(spi::parse_experiment_config(minimal_race_config()));

  const fs::path csv = root / "out/mini/csv";
  const fs::path plots = root / "out/mini/plots";
  REQUIRE(fs::exists(csv / "gd.csv"));
  REQUIRE(fs::exists(csv / "spi.csv"));
  REQUIRE(fs::exists(csv / "summary.csv"));
  REQUIRE(fs::exists(plots / "loss_curves.svg"));
  REQUIRE(fs::exists(plots / "path_gd.svg"));
  REQUIRE(fs::exists(plots / "path_spi.svg"));

  const auto summary = oracle::parse_csv(oracle::slurp((csv / "summary.csv").string()));
  REQUIRE(summary.size() == 3);
  REQUIRE(summary[0].size() == 6);
  CHECK(summary[0] ==
        std::vector<std::string>{"optimizer", "settling_time",
                                 "max_overshoot_dim1", "max_overshoot_dim2",
                                 "first_hit_1e-5", "diverged"});
  CHECK(summary[1][0] == "gd");
  CHECK(summary[2][0] == "spi");
  CHECK(summary[1][5] == "false");

  const auto traj = oracle::parse_csv(oracle::slurp((csv / "spi.csv").string()));
  REQUIRE(traj.size() == 42);  // header + 41 points
  CHECK(traj[0] == std::vector<std::string>{"step", "theta_1", "theta_2", "loss",
                                            "residual_norm", "state_delay",
                                            "gate_1", "gate_2"});
  CHECK(traj[1][0] == "0");
  CHECK(traj[1][1] == "-2");
  CHECK(traj[1][2] == "1");
  CHECK(traj[1][3] == "54");

  for (const char* f : {"loss_curves.svg", "path_gd.svg", "path_spi.svg"}) {
    const std::string svg = oracle::slurp((plots / f).string());
    INFO(f);
    CHECK(svg.find("<svg") == 0);
    CHECK(oracle::xml_well_formed(svg));
  }
}

TEST_CASE("race outputs are byte-stable across runs") {
  const fs::path root_a = fresh_dir("stable_a");
  const fs::path root_b = fresh_dir("stable_b");
  const auto cfg = spi::parse_experiment_config(minimal_race_config());
  {
    EnvGuard guard(root_a);
    spi::run_experiment(cfg);
  }
  {
    EnvGuard guard(root_b);
    spi::run_experiment(cfg);
  }
  for (const char* rel : {"out/mini/csv/gd.csv", "out/mini/csv/spi.csv",
                          "out/mini/csv/summary.csv",
                          "out/mini/plots/loss_curves.svg",
                          "out/mini/plots/path_spi.svg"}) {
    INFO(rel);
    const std::string a = oracle::slurp((root_a / rel).string());
    CHECK_FALSE(a.empty());
    CHECK(a == oracle::slurp((root_b / rel).string()));
  }
}

TEST_CASE("divergent optimizers land in the summary, not an error") {
  const fs::path root = fresh_dir("diverge");
  EnvGuard guard(root);
  json cfg = minimal_race_config();
  cfg["optimizers"] = {{{"label", "wild"}, {"kind", "sgd"}, {"hyper", {{"r", 1.0}}}}};
  spi::run_experiment(spi::parse_experiment_config(cfg));
  const auto summary =
      oracle::parse_csv(oracle::slurp((root / "out/mini/csv/summary.csv").string()));
  REQUIRE(summary.size() == 2);
  CHECK(summary[1][0] == "wild");
  CHECK(summary[1][1] == "");  // no settling
  CHECK(summary[1][4] == "");  // no hit
  CHECK(summary[1][5] == "true");
}

TEST_CASE("theorem suite writes its table and reports failures via the count") {
  const fs::path root = fresh_dir("theorem");
  EnvGuard guard(root);
  const int failures = spi::run_theorem_suite(25, 11, "theorem.csv");
  CHECK(failures == 0);
  const auto rows = oracle::parse_csv(oracle::slurp((root / "theorem.csv").string()));
  REQUIRE(rows.size() == 26);
  CHECK(rows[0] == std::vector<std::string>{"mu", "L", "r", "alpha", "z",
                                            "bound_holds", "worst_margin"});
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i][5] == "true");
    CHECK(std::stod(rows[i][4]) < 1.0);
    CHECK(std::stod(rows[i][2]) > 0.0);
  }
  CHECK_THROWS_AS(spi::run_theorem_suite(0, 1, "x.csv"), spi::ConfigError);

  // a fixed instance produces exactly one row with the requested constants
  const int f2 = spi::run_theorem_suite(99, 11, "one.csv",
                                        spi::TheoremInstanceOverride{1.0, 1.0,
                                                                     1.0, 0.05});
  CHECK(f2 == 0);
  const auto one = oracle::parse_csv(oracle::slurp((root / "one.csv").string()));
  REQUIRE(one.size() == 2);
  CHECK(std::stod(one[1][0]) == 1.0);
  CHECK(std::stod(one[1][1]) == 1.0);
  CHECK(std::stod(one[1][2]) == 1.0);
  CHECK(std::stod(one[1][3]) == 0.05);
  CHECK(std::stod(one[1][4]) == Catch::Approx(0.5747).margin(1e-4));
  CHECK(one[1][5] == "true");
}

TEST_CASE("nn config parsing and the robustness suite") {
  json j{{"config_version", 1},
         {"name", "nn_mini"},
         {"dataset",
          {{"synthetic",
            {{"n_per_class", 16}, {"d", 2}, {"separation", 4.0}, {"seed", 7}}}}},
         {"model", {{"hidden", 4}, {"init_seed", 1}}},
         {"train",
          {{"epochs", 3}, {"batch_size", 8}, {"shuffle_seed", 1}, {"alpha", 0.9}}},
         {"r_grid", {0.1, 1000.0}},
         {"optimizers", {"sgd", "mom"}}};
  const auto cfg = spi::parse_nn_config(j);
  CHECK(cfg.hidden == 4);
  CHECK(cfg.epochs == 3);
  CHECK(cfg.r_grid.size() == 2);

  const fs::path root = fresh_dir("nn");
  EnvGuard guard(root);
  spi::run_nn_suite(cfg);
  const fs::path csv = root / "out/nn_mini/csv";
  REQUIRE(fs::exists(csv / "robustness.csv"));
  REQUIRE(fs::exists(csv / "nn_sgd_r0.1.csv"));
  REQUIRE(fs::exists(csv / "nn_mom_r1000.csv"));
  REQUIRE(fs::exists(csv / "rng_info.txt"));
  const auto table = oracle::parse_csv(oracle::slurp((csv / "robustness.csv").string()));
  REQUIRE(table.size() == 5);  // header + 2 optimizers x 2 rates
  CHECK(table[0] == std::vector<std::string>{"optimizer", "r", "final_loss",
                                             "final_accuracy", "diverged",
                                             "diverged_epoch"});
  // the absurd rate diverges for momentum, the sane one does not
  CHECK(table[1][4] == "false");
  CHECK(table[4][4] == "true");
  CHECK(oracle::slurp((csv / "rng_info.txt").string()).find("mt19937_64") !=
        std::string::npos);

  json bad = j;
  bad.erase("r_grid");
  CHECK_THROWS_AS(spi::parse_nn_config(bad), spi::ConfigError);
  bad = j;
  bad["dataset"] = {{"mystery", 1}};
  CHECK_THROWS_AS(spi::parse_nn_config(bad), spi::ConfigError);

  // an idx dataset parses, but missing files surface as a file error
  json idx = j;
  idx["dataset"] = {{"idx",
                     {{"images", (root / "no-images").string()},
                      {"labels", (root / "no-labels").string()}}}};
  const auto idx_cfg = spi::parse_nn_config(idx);
  CHECK_FALSE(idx_cfg.dataset.synthetic);
  CHECK_THROWS_WITH(spi::run_nn_suite(idx_cfg),
                    Catch::Matchers::ContainsSubstring("cannot open file"));
}

TEST_CASE("nn suite with zero momentum makes the gated optimizers plain sgd") {
  json j{{"config_version", 1},
         {"name", "nn_a0"},
         {"dataset",
          {{"synthetic",
            {{"n_per_class", 16}, {"d", 2}, {"separation", 4.0}, {"seed", 7}}}}},
         {"model", {{"hidden", 4}, {"init_seed", 1}}},
         {"train",
          {{"epochs", 3}, {"batch_size", 8}, {"shuffle_seed", 1}, {"alpha", 0.0}}},
         {"r_grid", {0.2}},
         {"optimizers", {"sgd", "mom", "spi"}}};
  const fs::path root = fresh_dir("nn_a0");
  EnvGuard guard(root);
  spi::run_nn_suite(spi::parse_nn_config(j));
  const fs::path csv = root / "out/nn_a0/csv";
  const std::string sgd = oracle::slurp((csv / "nn_sgd_r0.2.csv").string());
  CHECK(oracle::slurp((csv / "nn_mom_r0.2.csv").string()) == sgd);
  CHECK(oracle::slurp((csv / "nn_spi_r0.2.csv").string()) == sgd);
  // summary rows differ only in the optimizer column
  const auto table =
      oracle::parse_csv(oracle::slurp((csv / "robustness.csv").string()));
  REQUIRE(table.size() == 4);
  for (std::size_t col = 1; col < table[1].size(); ++col) {
    CHECK(table[1][col] == table[2][col]);
    CHECK(table[1][col] == table[3][col]);
  }
}

TEST_CASE("gradcheck audits every target") {
  std::ostringstream out;
  CHECK(spi::run_gradcheck(out));
  const std::string text = out.str();
  for (const char* name : {"f1", "f2", "f3", "f4", "f5", "mlp backprop"})
    CHECK(text.find(name) != std::string::npos);
  CHECK(text.find("[FAIL]") == std::string::npos);
}

TEST_CASE("bundled configs parse cleanly") {
  const fs::path configs = fs::path(SPI_SOURCE_DIR) / "configs";
  REQUIRE(fs::exists(configs));
  int seen = 0;
  for (const auto& entry : fs::directory_iterator(configs)) {
    if (entry.path().extension() != ".json") continue;
    ++seen;
    INFO(entry.path().string());
    if (entry.path().filename().string().rfind("nn", 0) == 0)
      CHECK_NOTHROW(spi::load_nn_config(entry.path().string()));
    else
      CHECK_NOTHROW(spi::load_experiment_config(entry.path().string()));
  }
  CHECK(seen >= 7);
}

TEST_CASE("command line front end wires the verbs") {
  const fs::path root = fresh_dir("clibin");
  EnvGuard guard(root);
  const fs::path cfg_path = root / "race.json";
  std::ofstream(cfg_path) << minimal_race_config().dump(2);

  CHECK(run_cli("race " + cfg_path.string()) == 0);
  CHECK(fs::exists(root / "out/mini/csv/summary.csv"));

  CHECK(run_cli("theorem --samples 10 --seed 3 --out t.csv") == 0);
  CHECK(fs::exists(root / "t.csv"));

  CHECK(run_cli("gradcheck") == 0);

  // misuse signals through the exit code
  CHECK(run_cli("race /nonexistent.json") != 0);
  CHECK(run_cli("theorem --samples 0") != 0);
  CHECK(run_cli("theorem --mu 2 --L 10") != 0);  // partial fixed instance
  CHECK(run_cli("") != 0);                       // missing subcommand

  std::ofstream(root / "broken.json") << "{ not json";
  CHECK(run_cli("race " + (root / "broken.json").string()) != 0);
}
