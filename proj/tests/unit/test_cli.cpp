#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "kinlab/commands.hpp"
#include "kinlab/errors.hpp"
#include "kinlab/run_config.hpp"

using namespace kinlab;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path work_dir()
{
  static const fs::path dir = [] {
    fs::path p = fs::temp_directory_path() / ("kinlab_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

fs::path write_file(const std::string& name, const std::string& content)
{
  const fs::path p = work_dir() / name;
  std::ofstream(p) << content;
  return p;
}

struct Run
{
  int code = -1;
  std::string output;
};

/// Runs the CLI binary; `args` is appended verbatim.
Run cli(const std::string& args)
{
  const fs::path log = work_dir() / "last.log";
  const std::string cmd = std::string("cd '") + work_dir().string() + "' && '" + KINLAB_CLI_PATH + "' " + args +
                          " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.output = ss.str();
  return r;
}

json read_json(const fs::path& p)
{
  std::ifstream in(p);
  return json::parse(in);
}

std::string slurp(const fs::path& p)
{
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parsing")
{
  const RunConfig cfg = RunConfig::parse("[global]\nd = 3\nR = 2.5\n[scan]\neps_list = 0.1, 0.05 0.01\nwell_prepared = no\n");
  CHECK(cfg.get_int("global", "d", 1) == 3);
  CHECK(cfg.get_double("global", "R", 1.0) == 2.5);
  CHECK(cfg.get_list("scan", "eps_list", {}) == std::vector<double>{0.1, 0.05, 0.01});
  CHECK_FALSE(cfg.get_bool("scan", "well_prepared", true));
  CHECK(cfg.get_double("bgk", "tau", 1.5) == 1.5);
  const json echo = cfg.echo();
  CHECK(echo["bgk"]["tau"] == 1.5);
  CHECK(echo["global"]["d"] == 3);

  CHECK_THROWS_AS(RunConfig::parse("[global]\nbogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("[nowhere]\nR = 1\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("R = 1\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("[global\nR = 1\n"), ConfigError);
  const RunConfig bad = RunConfig::parse("[global]\nR = fast\nd = 2.5\n");
  CHECK_THROWS_AS(bad.get_double("global", "R", 1.0), ConfigError);
  CHECK_THROWS_AS(bad.get_int("global", "d", 1), ConfigError);
  RunConfig s;
  CHECK_THROWS_AS(s.set("grid", "nope", "1"), ConfigError);
}

TEST_CASE("run_command maps errors onto exit codes")
{
  std::ostringstream log;
  CommandOptions opts;
  opts.out_dir = (work_dir() / "direct").string();
  CHECK(run_command("no-such-command", RunConfig{}, opts, log) == kExitInvalid);
  CHECK(run_command("ce-verify", RunConfig::parse("[bgk]\ntau = -1\n"), opts, log) == kExitInvalid);
  CHECK(run_command("ce-verify", RunConfig::parse("[grid]\nderivative = magic\n"), opts, log) == kExitInvalid);
  CHECK(fs::exists(fs::path(opts.out_dir) / "manifest.json"));
  CHECK(command_names().size() == 6);
}

TEST_CASE("ce-verify")
{
  Run r = cli("ce-verify --out ce");
  CHECK(r.code == 0);
  const json j = read_json(work_dir() / "ce/ce_verify.json");
  CHECK(j["pass"] == true);
  CHECK(j["max_rel_err"].get<double>() <= 1e-6);
  for (const auto& row : j["mu_table"]) CHECK(row["mu"].get<double>() == doctest::Approx(row["rho_tau_R_T"].get<double>()));
  CHECK(j.contains("config"));
  CHECK(fs::exists(work_dir() / "ce/ce_verify.csv"));
  const json man = read_json(work_dir() / "ce/manifest.json");
  CHECK(man["status"] == "pass");
  CHECK(man["artifacts"].size() == 2);

  write_file("uniform.ini", "[fields]\nprofile = uniform\n");
  r = cli("ce-verify --config uniform.ini --out ce_u");
  CHECK(r.code == 0);
  const json u = read_json(work_dir() / "ce_u/ce_verify.json");
  CHECK(u["f1_norm"].get<double>() < 1e-12);
  CHECK(u["tau1_norm"].get<double>() == 0.0);

  write_file("d1.ini", "[global]\nd = 1\n");
  r = cli("ce-verify --config d1.ini --out ce_d1");
  CHECK(r.code == 2);
  CHECK(r.output.find("deviatoric check requires d ≥ 2") != std::string::npos);
}

TEST_CASE("spectral")
{
  Run r = cli("spectral --out sp --seed 7");
  CHECK(r.code == 0);
  const json j = read_json(work_dir() / "sp/spectrum.json");
  CHECK(std::abs(j["lambda0"].get<double>() - 1.0) <= 1e-10);
  CHECK(j["nullspace_dim"] == 4);

  // byte-identical output for the same config and seed
  r = cli("spectral --out sp2 --seed 7");
  CHECK(slurp(work_dir() / "sp/spectrum.json") == slurp(work_dir() / "sp2/spectrum.json"));

  write_file("op.json", R"({"spectrum": [0, 0, -0.4, -2.0, -3.0], "seed": 5})");
  write_file("op.ini", "[spectral]\noperator_file = op.json\ndump_matrix = true\n");
  r = cli("spectral --config op.ini --out sp_syn");
  CHECK(r.code == 0);
  const json s = read_json(work_dir() / "sp_syn/spectrum.json");
  CHECK(s["lambda0"].get<double>() == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(s["nullspace_dim"] == 2);
  CHECK(fs::exists(work_dir() / "sp_syn/operator_matrix.csv"));

  write_file("bad.json", R"({"spectrum": [0, -1, )");
  write_file("bad.ini", "[spectral]\noperator_file = bad.json\n");
  CHECK(cli("spectral --config bad.ini --out sp_bad").code == 2);
  write_file("ns.json", R"({"matrix": [[0, 1], [0, 0]]})");
  write_file("ns.ini", "[spectral]\noperator_file = ns.json\n");
  CHECK(cli("spectral --config ns.ini --out sp_ns").code == 2);

  write_file("path.ini", "[spectral]\npath_T_end = 1.5\npath_points = 4\n");
  r = cli("spectral --config path.ini --out sp_path");
  CHECK(r.code == 0);
  CHECK(read_json(work_dir() / "sp_path/spectrum.json")["continuity"]["bounded"] == true);
}

TEST_CASE("remainder-scan input handling")
{
  write_file("one.ini", "[scan]\neps_list = 0.01\n");
  const Run r = cli("remainder-scan --config one.ini --out rs_one");
  CHECK(r.code == 2);
  CHECK(r.output.find("need ≥ 3 epsilons for a slope") != std::string::npos);

  write_file("ill.ini",
             "[grid]\nn_cells = 32\nvelocity_nodes = 16\n[fields]\nprofile = mixed\n[solver]\nt_final = 0.02\n"
             "[scan]\neps_list = 0.03, 0.01, 0.003\nwell_prepared = false\nsnapshot_stride = 50\n");
  const Run ill = cli("remainder-scan --config ill.ini --out rs_ill --threads 2");
  CHECK(ill.code == 0);
  const json j = read_json(work_dir() / "rs_ill/remainder_scan.json");
  CHECK(j["gated"] == false);
  CHECK(j["slope"].get<double>() < 1.5);
  CHECK(fs::exists(work_dir() / "rs_ill/remainder_scan.csv"));
  CHECK(fs::exists(work_dir() / "rs_ill/snapshots/eps0_step0.csv"));
}

TEST_CASE("transient-growth")
{
  write_file("quiet.ini", "[shear]\nprofile = quiescent\nRe = 200\nkx = 1\nkz = 1\nny = 24\n");
  Run r = cli("transient-growth --config quiet.ini --out tg_q");
  CHECK(r.code == 0);
  const json q = read_json(work_dir() / "tg_q/transient_growth.json");
  CHECK(std::abs(q["G_max"].get<double>() - 1.0) <= 1e-8);

  write_file("sweep.ini", "[shear]\nRe = 200\nny = 24\nRe_list = 100, 200, 400\na0 = 1e-4\na_nl = 1e-3\n");
  r = cli("transient-growth --config sweep.ini --out tg_s --threads 2");
  CHECK(r.code == 0);
  const json s = read_json(work_dir() / "tg_s/transient_growth.json");
  CHECK(std::abs(s["sweep"]["slope_fit"].get<double>() - 2.0) <= 0.3);
  CHECK(s["threshold"]["required_G"].get<double>() == doctest::Approx(100.0));
  CHECK(r.output.find("threshold:") != std::string::npos);
  CHECK(fs::exists(work_dir() / "tg_s/growth_envelope.csv"));
  CHECK(fs::exists(work_dir() / "tg_s/optimal_seed.csv"));
  CHECK(fs::exists(work_dir() / "tg_s/re_sweep.csv"));

  // an inflectional mixing layer is unstable and overflows the exponential at long times
  std::string csv = "y,U\n";
  for (int i = 0; i <= 80; ++i) {
    const double y = -1.0 + 0.025 * i;
    csv += std::to_string(y) + "," + std::to_string(std::tanh(y / 0.1)) + "\n";
  }
  write_file("kh.csv", csv);
  write_file("kh.ini", "[shear]\nprofile = custom\ncustom_file = kh.csv\nRe = 2000\nkx = 2\nkz = 0\nny = 32\n");
  r = cli("transient-growth --config kh.ini --out tg_kh");
  CHECK(r.code == 3);
  CHECK(read_json(work_dir() / "tg_kh/manifest.json")["exit_code"] == 3);
}

TEST_CASE("energy-budget and entropy")
{
  write_file("eb.ini",
             "[shear]\nRe = 200\nny = 24\nbudget_points = 8\n[energy]\nn_cells = 32\nvelocity_nodes = 16\n"
             "t_final = 0.02\n");
  Run r = cli("energy-budget --config eb.ini --out eb");
  CHECK(r.code == 0);
  const json e = read_json(work_dir() / "eb/energy_budget.json");
  CHECK(e["linear"]["max_rel_residual"].get<double>() <= 1e-6);
  CHECK(e["macroscopic"]["residual_kinetic"].get<double>() <= 0.05);

  write_file("ent.ini", "[entropy]\nvelocity_nodes = 16\n");
  r = cli("entropy --config ent.ini --out ent");
  CHECK(r.code == 0);
  CHECK(read_json(work_dir() / "ent/entropy.json")["monotone"] == true);
}

TEST_CASE("command-line and config errors")
{
  CHECK(cli("ce-verify --config missing.ini").code == 2);
  write_file("unknown.ini", "[grid]\nbogus = 1\n");
  CHECK(cli("ce-verify --config unknown.ini").code == 2);
  CHECK(cli("frobnicate").code == 2);
  CHECK(cli("").code == 2);
  CHECK(cli("--help").code == 0);
  CHECK(cli("ce-verify --threads 0").code == 2);
}
