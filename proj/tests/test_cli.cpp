#include "peal/experiments.hpp"

#include <doctest.h>
#include <json.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace peal;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("peal_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

int run(const std::string& args) {
  const std::string cmd = std::string(PEAL_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::size_t data_lines(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') ++n;
  return n - 1;  // header
}

}  // namespace

TEST_CASE("config round trip and typed access") {
  const RunConfig c = RunConfig::parse(
      "seed = 7\n# comment\n[model]\nL = 20\ng = 1.37\n[train]\nR_grid = 5, 10\ngamma_grid = 0.3,6\nflag = yes\n");
  CHECK(c.get_uint("run", "seed", 0) == 7);
  CHECK(c.get_int("model", "L", 0) == 20);
  CHECK(c.get_doubles("train", "gamma_grid", {}) == std::vector<double>{0.3, 6});
  CHECK(c.get_ints("train", "R_grid", {}) == std::vector<long>{5, 10});
  CHECK(c.get_bool("train", "flag", false));
  CHECK(c.get_double("model", "dt", 0.05) == 0.05);
  CHECK(RunConfig::parse(c.to_string()) == c);
  CHECK(c.holstein().g == 1.37);

  CHECK_THROWS_WITH_AS(RunConfig::parse("[model]\nL = 7\n").holstein(), doctest::Contains("model.L"), ParameterError);
  CHECK_THROWS_WITH_AS(RunConfig::parse("[model]\ndt = 0\n").holstein(), doctest::Contains("model.dt"),
                       ParameterError);
  CHECK_THROWS_WITH_AS(RunConfig::parse("[train]\nR_grid =\n").get_ints("train", "R_grid", {1}),
                       doctest::Contains("train.R_grid"), ParameterError);
  CHECK_THROWS_WITH_AS(RunConfig::parse("[model]\ng = abc\n").holstein(), doctest::Contains("model.g"),
                       ParameterError);
  CHECK_THROWS_AS(RunConfig::parse("[broken\n"), ParameterError);
  CHECK_THROWS_AS(RunConfig::parse("no equals sign\n"), ParameterError);
}

TEST_CASE("pipeline helpers") {
  CHECK(path_filename({"train", 1.3, 7}) == "train_g1.3000_p007.csv");
  CHECK(path_seed(1, {"train", 1.3, 0}) != path_seed(1, {"train", 1.3, 1}));
  CHECK(path_seed(1, {"train", 1.3, 0}) != path_seed(1, {"test_sl", 1.3, 0}));
  CHECK(nonincreasing_up_to_one_inversion({5, 4, 4.5, 3, 2}));
  CHECK_FALSE(nonincreasing_up_to_one_inversion({5, 6, 4, 4.5}));
  const std::string t = critical_coupling_table({2, 50}, 1.0);
  CHECK(t.find("0.7529") != std::string::npos);
  CHECK(t.find("1.1524") != std::string::npos);

  EnsembleStats st;
  st.qq_mean = Eigen::MatrixXd::Zero(4, 4);
  st.qq_var = Eigen::MatrixXd::Zero(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) st.qq_mean(i, j) = std::min((i - j + 4) % 4, (j - i + 4) % 4);
  const DistanceProfile d = distance_profile(st);
  CHECK(d.mean == std::vector<double>{0, 1, 2});
}

TEST_CASE("simulate writes deterministic trajectories") {
  const fs::path d = scratch("simulate");
  REQUIRE(run("simulate --g 1.4 --steps 200 --stride 10 --seed 3 --out " + (d / "a").string()) == 0);
  REQUIRE(run("simulate --g 1.4 --steps 200 --stride 10 --seed 3 --out " + (d / "b").string()) == 0);
  const fs::path f = d / "a" / "train_g1.4000_p000.csv";
  CHECK(data_lines(f) == 1 + 200 / 10);
  CHECK(slurp(f) == slurp(d / "b" / "train_g1.4000_p000.csv"));

  write(d / "grid.ini", "[simulate]\ng_list = 1.3,1.32\npaths = 2\nset = pool\n");
  REQUIRE(run("simulate --config " + (d / "grid.ini").string() + " --steps 20 --out " + (d / "c").string()) == 0);
  CHECK(load_set((d / "c").string(), "pool", HolsteinParams{}).size() == 4);
}

TEST_CASE("validation errors exit with 1") {
  const fs::path d = scratch("invalid");
  CHECK(run("simulate --L 7 --steps 10 --out " + d.string()) == 1);
  CHECK(run("simulate --dt 0 --steps 10 --out " + d.string()) == 1);
  CHECK(run("simulate --steps 0 --out " + d.string()) == 1);
  write(d / "empty.ini", "[simulate]\ng_list =\n");
  CHECK(run("simulate --config " + (d / "empty.ini").string() + " --out " + d.string()) == 1);
  CHECK(run("simulate --config " + (d / "missing.ini").string()) == 1);
  CHECK(run("train --out " + (d / "nothing").string()) == 1);
  CHECK(run("frobnicate") == 1);
  CHECK(run("simulate --steps notanumber") == 1);
}

TEST_CASE("numerical failure exits with 2") {
  const fs::path d = scratch("numerical");
  const std::string model =
      R"({"kind":"density","L":10,"radius":1,"R":1,"gamma_omega":1,"g_mode":"scaled","seed":0,)"
      R"("frequencies":[0.1,0.2,0.3],"intercept":1e12,"alpha":0,"nnz":0,"weights":[],"fingerprint":"x"})";
  write(d / "huge.json", model);
  write(d / "run.ini", "[predict]\nu1 = false\n");
  CHECK(run("predict --L 10 --steps 500 --config " + (d / "run.ini").string() + " --model " +
            (d / "huge.json").string() + " --out " + d.string()) == 2);
}

TEST_CASE("compare in oracle mode gives a zero report") {
  const fs::path d = scratch("compare");
  write(d / "run.ini", "[compare]\nu1 = false\n");
  REQUIRE(run("compare --L 10 --steps 300 --model exact --config " + (d / "run.ini").string() + " --out " +
              d.string()) == 0);
  const auto j = nlohmann::json::parse(slurp(d / "compare.json"));
  CHECK(j.at("density_rmse").get<double>() == 0);
  CHECK(j.at("max_cdw_dev").get<double>() == 0);
  CHECK(j.at("max_hop_dev").get<double>() == 0);
  const std::string csv = slurp(d / "compare.csv");
  for (const char* col : {"cdw_exact", "n0_exact", "Q0_exact", "P0_exact", "hop_exact", "nnn_exact"})
    CHECK(csv.find(col) != std::string::npos);
}

TEST_CASE("train, predict and scale on a small pool") {
  const fs::path d = scratch("train");
  const std::string out = " --out " + d.string();
  REQUIRE(run("simulate --L 10 --steps 300 --stride 10" + out) == 0);
  write(d / "train.ini", "[train]\nsamples = 1\nR_grid = 3\ngamma_grid = 1\npairs_per_path = 50\n");
  REQUIRE(run("train --L 10 --config " + (d / "train.ini").string() + out) == 0);
  const SurrogateModel m = load_model((d / "model_density.json").string());
  CHECK(m.map.R == 3);
  CHECK(m.map.L == 10);
  const std::string model_text = slurp(d / "model_density.json");
  REQUIRE(run("train --L 10 --config " + (d / "train.ini").string() + out) == 0);
  CHECK(slurp(d / "model_density.json") == model_text);
  CHECK(fs::exists(d / "model_density_cv.csv"));
  CHECK(fs::exists(d / "model_density_grid.csv"));

  REQUIRE(run("predict --L 10 --steps 100 --model " + (d / "model_density.json").string() + out) == 0);
  CHECK(data_lines(d / "peal.csv") == 11);
  CHECK(run("predict --L 12 --steps 100 --model " + (d / "model_density.json").string() + out) == 1);

  write(d / "more.ini", "[simulate]\nset = test_sl\n");
  REQUIRE(run("simulate --L 10 --steps 300 --config " + (d / "more.ini").string() + out) == 0);
  write(d / "more.ini", "[simulate]\nset = test_tl\ng_list = 1.39\n");
  REQUIRE(run("simulate --L 10 --steps 300 --config " + (d / "more.ini").string() + out) == 0);
  write(d / "scale.ini", "[scaling]\ncounts = 1,2\nR = 3\ngamma_omega = 1\npairs_per_path = 50\n");
  REQUIRE(run("scaling --L 10 --config " + (d / "scale.ini").string() + out) == 0);
  CHECK(data_lines(d / "scaling.csv") == 2);
  CHECK(fs::exists(d / "scatter.csv"));
}

TEST_CASE("analysis commands") {
  const fs::path d = scratch("analysis");
  const std::string out = " --out " + d.string();
  REQUIRE(run("analyze-cdw" + out) == 0);
  const std::string table = slurp(d / "critical_coupling.txt");
  for (const char* v : {"0.2500", "0.4167", "0.4972", "0.6224", "0.7529", "0.8664", "1.5492", "1.0743"})
    CHECK(table.find(v) != std::string::npos);
  CHECK(fs::exists(d / "cdw_curve.csv"));
  CHECK(nlohmann::json::parse(slurp(d / "stability.json")).at("finite").at("stable_cdw").get<bool>());

  write(d / "bounds.ini", "[bounds]\nt_to = 20\nhorizon = 300\n");
  REQUIRE(run("check-bounds --steps 2000 --config " + (d / "bounds.ini").string() + out) == 0);
  CHECK(fs::exists(d / "stiffness.csv"));
  const auto spring = nlohmann::json::parse(slurp(d / "spring.json"));
  CHECK(spring.contains("holds"));
  REQUIRE(fs::exists(d / "spec.json"));

  write(d / "relax.ini", "[relax]\nspec = " + (d / "spec.json").string() + "\nepsilons = 1e-6, 1e-5\n");
  REQUIRE(run("relax --config " + (d / "relax.ini").string() + " --out " + (d / "r").string()) == 0);
  CHECK(fs::exists(d / "r" / "relaxation.json"));
  write(d / "bad.ini", "[relax]\nspec = " + (d / "nope.json").string() + "\n");
  CHECK(run("relax --config " + (d / "bad.ini").string() + out) == 1);

  write(d / "ens.ini", "[ensemble]\npaths = 2\ntarget_time = 1\n");
  REQUIRE(run("ensemble --L 10 --config " + (d / "ens.ini").string() + out) == 0);
  CHECK(fs::exists(d / "ensemble_exact.csv"));
  CHECK(fs::exists(d / "ensemble_profile.csv"));
}
