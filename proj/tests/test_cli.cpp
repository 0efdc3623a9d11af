#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "tubal/config.hpp"
#include "tubal/error.hpp"
#include "tubal/experiment.hpp"

using namespace tubal;
using namespace tubal::cli;
namespace fs = std::filesystem;

namespace {

fs::path workdir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "tubal_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "run.cfg";
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

ExitCode run(const std::string& command, const fs::path& cfg, const fs::path& out, int workers = 1,
             bool aggregate = false) {
  CommandOptions opt;
  opt.command = command;
  opt.config = cfg;
  opt.out_dir = out;
  opt.workers = workers;
  opt.aggregate = aggregate;
  return run_command(opt);
}

constexpr const char* kSmallRecover =
    "n = 6\nk = 2\nr = 1\nm_factor = 10\nR = 1, 2\nT = 100\nsigma = 1e-3\n"
    "init = small, spectral\nrepeats = 2\nseed = 5\n";

}  // namespace

TEST_CASE("config parsing") {
  const Config c = Config::parse_string("# comment\nn = 3, 4\neta=+0.5 # trailing\nflag = yes\nname = abc\n");
  CHECK(c.integers("n") == std::vector<Index>{3, 4});
  CHECK(c.real("eta", 0.0) == 0.5);
  CHECK(c.flag("flag", false));
  CHECK(c.text("name", "") == "abc");
  CHECK(c.integer("missing", 7) == 7);
  CHECK_THROWS_AS(c.integer("n", 0), Error);  // two values for a scalar
  CHECK_THROWS_AS(Config::parse_string("n = 1\nn = 2\n"), Error);
  CHECK_THROWS_AS(Config::parse_string("n =\n"), Error);
  CHECK_THROWS_AS(Config::parse_string("just words\n"), Error);
  CHECK_THROWS_AS(Config::parse_string("n = 1x\n").integer("n", 0), Error);
  CHECK_THROWS_AS(c.require_known({"n", "eta"}), Error);
}

TEST_CASE("measurement count rules") {
  CHECK(measurement_count(MRule::nrk, 10, 30, 3, 3) == 2700);
  CHECK(measurement_count(MRule::two_cm, 5, 30, 3, 3) == 2700);
  CHECK(measurement_count(MRule::kr2n, 5, 20, 2, 3) == 1140);
  CHECK(parse_m_rule("2cm") == MRule::two_cm);
  CHECK_THROWS_AS(parse_m_rule("x"), Error);
}

TEST_CASE("noise parameter mapping") {
  CHECK(noise_at(NoiseSpec::Kind::exponential, 1e-3, 1).param == doctest::Approx(1000.0));
  CHECK(noise_at(NoiseSpec::Kind::laplace, 2e-3, 1).param == 2e-3);
  CHECK(noise_at(NoiseSpec::Kind::gaussian, 0.0, 1).kind == NoiseSpec::Kind::none);
}

TEST_CASE("recover is deterministic and independent of workers") {
  const fs::path dir = workdir("recover");
  const fs::path cfg = write_config(dir, kSmallRecover);
  REQUIRE(run("recover", cfg, dir / "a", 1, true) == ExitCode::ok);
  REQUIRE(run("recover", cfg, dir / "b", 3) == ExitCode::ok);
  const std::string a = slurp(dir / "a" / "recover.csv");
  CHECK(a == slurp(dir / "b" / "recover.csv"));
  CHECK(a.rfind("n,k,r,R,m,sigma,eta,init,repeat,rse_best,rse_es,rse_final,t_check,noise,alpha,val_frac,T,status\n", 0) == 0);
  CHECK(std::count(a.begin(), a.end(), '\n') == 9);
  CHECK(fs::exists(dir / "a" / "recover_aggregate.csv"));
  const auto man = nlohmann::json::parse(slurp(dir / "a" / "manifest.json"));
  CHECK(man["outputs"].contains("recover.csv"));
  CHECK(man["config"]["crc32"].get<std::string>().size() == 8);
}

TEST_CASE("synth artifacts reproduce the inline instance") {
  const fs::path dir = workdir("synth");
  const fs::path cfg = write_config(dir, "n = 6\nk = 2\nr = 1\nm_factor = 10\nsigma = 1e-3\nseed = 5\n");
  REQUIRE(run("synth", cfg, dir / "s") == ExitCode::ok);
  const fs::path inst = dir / "s" / "synth" / "n6_k2_r1_m120_rep0";
  for (const char* f : {"X_factor.tbl3", "X_star.tbl3", "operator.tsns", "noise.vec", "y.vec", "manifest.json"})
    CHECK(fs::exists(inst / f));

  const fs::path in_cfg = write_config(dir, "input = " + inst.string() + "\nR = 2\nT = 100\nseed = 5\n");
  REQUIRE(run("recover", in_cfg, dir / "from_file") == ExitCode::ok);
  const fs::path inline_cfg = write_config(dir, "n = 6\nk = 2\nr = 1\nm_factor = 10\nR = 2\nT = 100\nseed = 5\n");
  REQUIRE(run("recover", inline_cfg, dir / "inline") == ExitCode::ok);
  std::istringstream a(slurp(dir / "from_file" / "recover.csv")), b(slurp(dir / "inline" / "recover.csv"));
  std::string la, lb;
  std::getline(a, la);
  std::getline(b, lb);
  std::getline(a, la);
  std::getline(b, lb);
  // Same instance, same seeds; rse_best agrees to round-off.
  auto field = [](const std::string& line, int idx) {
    std::stringstream ss(line);
    std::string f;
    for (int i = 0; i <= idx; ++i) std::getline(ss, f, ',');
    return std::stod(f);
  };
  CHECK(field(la, 9) == doctest::Approx(field(lb, 9)).epsilon(1e-9));
}

TEST_CASE("exit codes") {
  const fs::path dir = workdir("codes");
  CHECK(run("recover", dir / "missing.cfg", dir / "o") == ExitCode::io);
  CHECK(run("recover", write_config(dir, "n = 6\nbogus = 1\n"), dir / "o") == ExitCode::config);
  CHECK(run("frobnicate", write_config(dir, "n = 6\n"), dir / "o") == ExitCode::config);
  CHECK(run("trip-probe", write_config(dir, "r = 0\n"), dir / "o") == ExitCode::config);
  // A rank above n fails the row, not the config.
  CHECK(run("recover", write_config(dir, "n = 4\nk = 2\nr = 1\nR = 5\nT = 10\n"), dir / "o") == ExitCode::run);
  CHECK(slurp(dir / "o" / "recover.csv").find("R must lie in") != std::string::npos);
  // Divergence becomes an error row.
  CHECK(run("recover", write_config(dir, "n = 4\nk = 2\nr = 1\nR = 2\nT = 200\neta = 1000\nalpha = 1\n"),
            dir / "o") == ExitCode::run);
}

TEST_CASE("sweep aggregates the configured task") {
  const fs::path dir = workdir("sweep");
  const fs::path cfg = write_config(
      dir, "task = complete\nn1 = 10\nn2 = 8\nk = 2\nr = 2\nR = 3\nT = 50\np = 0.5\nrepeats = 2\n");
  REQUIRE(run("sweep", cfg, dir / "o") == ExitCode::ok);
  CHECK(fs::exists(dir / "o" / "complete.csv"));
  CHECK(fs::exists(dir / "o" / "complete_aggregate.csv"));
  CHECK(run("recover", cfg, dir / "x") == ExitCode::config);
}

TEST_CASE("trip probe outputs") {
  const fs::path dir = workdir("probe");
  const fs::path cfg = write_config(dir, "n = 5\nk = 2\nr = 1\nm_factor = 4, 8\nrepeats = 3\ntrials = 20\n");
  REQUIRE(run("trip-probe", cfg, dir / "o") == ExitCode::ok);
  const std::string summary = slurp(dir / "o" / "trip_probe_summary.csv");
  CHECK(summary.rfind("n,k,r,m_factor,m,count,median_delta_hat,max_delta_hat\n", 0) == 0);
  CHECK(std::count(summary.begin(), summary.end(), '\n') == 3);
  const std::string rows = slurp(dir / "o" / "trip_probe.csv");
  CHECK(std::count(rows.begin(), rows.end(), '\n') == 7);
}
