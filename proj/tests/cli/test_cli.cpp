#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "lphom/laminate.hpp"
#include "lphom/tensor.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kData = LPHOM_DATA_DIR;
const fs::path kScratch = fs::temp_directory_path() / "lphom_cli_tests";

struct Run {
  int code;
  std::string log;
};

Run run(const std::string& args, const std::string& tag) {
  fs::create_directories(kScratch);
  const fs::path log = kScratch / (tag + ".log");
  const std::string cmd = std::string(LPHOM_BIN) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

Run run_config(const std::string& command, const std::string& config, const std::string& tag) {
  fs::remove_all(kScratch / tag);
  return run(command + " --config " + (kData / config).string() + " --out " + (kScratch / tag).string() + " --jobs 1", tag);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json load(const fs::path& p) { return json::parse(slurp(p)); }

Eigen::MatrixXd matrix(const json& rows) {
  Eigen::MatrixXd m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j].get<double>();
  return m;
}

}  // namespace

TEST_CASE("cell: constant material gives the transformed phase tensor") {
  const Run r = run_config("cell", "constant_cell.json", "constant_cell");
  REQUIRE_MESSAGE(r.code == 0, r.log);
  const json e = load(kScratch / "constant_cell" / "effective.json");
  Eigen::MatrixXd v(3, 3);
  v << 4.0, 1.2, 0.3, 1.2, 3.0, -0.2, 0.3, -0.2, 1.5;
  const lph::Tensor2 K = lph::Tensor2::from_rows({{1.05, -0.1}, {0.15, 0.95}});
  const Eigen::MatrixXd expected = lph::apply_transform_elasticity(lph::Tensor4::from_voigt(v, 2), K).voigt();
  CHECK((matrix(e.at("elasticity_voigt")) - expected).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("cell: laminate C1111 matches the closed form") {
  const Run r = run_config("cell", "laminate_cell.json", "laminate_cell");
  REQUIRE_MESSAGE(r.code == 0, r.log);
  const json e = load(kScratch / "laminate_cell" / "effective.json");
  const double exact = lph::isotropic_laminate_normal_modulus({10, 1}, {10, 1}, {0.5, 0.5});
  CHECK(std::abs(e.at("elasticity_voigt")[0][0].get<double>() - exact) / exact <= 1e-3);
  CHECK(fs::exists(kScratch / "laminate_cell" / "correctors" / "w_E11.bin"));
  CHECK(fs::exists(kScratch / "laminate_cell" / "strain_E.csv"));
}

TEST_CASE("config errors exit with code 2") {
  Run r = run_config("direct", "bad_r.json", "bad_r");
  CHECK(r.code == 2);
  CHECK(r.log.find("micro.r") != std::string::npos);
  r = run_config("homogenize", "unknown_key.json", "unknown_key");
  CHECK(r.code == 2);
  CHECK(r.log.find("mesh_size") != std::string::npos);
  CHECK(run("cell --config " + (kData / "no_such_file.json").string(), "missing").code == 2);
  CHECK(run("cell", "no_config").code == 2);
  CHECK(run("frobnicate --config x.json", "bad_command").code == 2);
}

TEST_CASE("direct: under-resolved mesh is rejected naming the rule") {
  const Run r = run_config("direct", "direct_underresolved.json", "underresolved");
  CHECK(r.code == 2);
  CHECK(r.log.find("resolution rule") != std::string::npos);
}

TEST_CASE("direct: resolved inclusion run writes a displacement dump") {
  const Run r = run_config("direct", "direct_resolved.json", "direct_resolved");
  REQUIRE_MESSAGE(r.code == 0, r.log);
  CHECK(fs::exists(kScratch / "direct_resolved" / "u_direct.bin"));
  CHECK(load(kScratch / "direct_resolved" / "solution.json").at("patches").get<int>() == 16);
}

TEST_CASE("converge: single phase table sits at the floor and reruns from the manifest") {
  const Run r = run_config("converge", "single_phase_converge.json", "trivial");
  REQUIRE_MESSAGE(r.code == 0, r.log);
  const fs::path dir = kScratch / "trivial";
  std::istringstream csv(slurp(dir / "convergence.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "eps,cells,completed,l2_error,h1_error,h1_norm");
  int rows = 0;
  while (std::getline(csv, line)) {
    ++rows;
    std::vector<std::string> cols;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cols.push_back(c);
    REQUIRE(cols.size() == 6);
    CHECK(std::stod(cols[3]) < 1e-12);
  }
  CHECK(rows == 2);

  const json manifest = load(dir / "manifest.json");
  CHECK(manifest.at("command") == "converge");
  CHECK(manifest.at("exit_code") == 0);
  bool listed = false;
  for (const auto& o : manifest.at("outputs")) listed |= o.at("path") == "convergence.csv";
  CHECK(listed);

  fs::remove_all(kScratch / "trivial_rerun");
  const Run again = run("converge --config " + (dir / "manifest.json").string() + " --out " +
                            (kScratch / "trivial_rerun").string() + " --jobs 1",
                        "trivial_rerun");
  REQUIRE_MESSAGE(again.code == 0, again.log);
  CHECK(slurp(kScratch / "trivial_rerun" / "convergence.csv") == slurp(dir / "convergence.csv"));
  const json m2 = load(kScratch / "trivial_rerun" / "manifest.json");
  CHECK(m2.at("outputs") == manifest.at("outputs"));
  CHECK(m2.at("config_sha256") == manifest.at("config_sha256"));
}

TEST_CASE("homogenize: exported law reproduces the solution bit for bit") {
  const Run r = run_config("homogenize", "rotation_homogenize.json", "hom");
  REQUIRE_MESSAGE(r.code == 0, r.log);
  json cfg = load(kData / "rotation_homogenize.json");
  cfg.erase("material");
  cfg.erase("K");
  cfg["law"] = {{"strategy", "file"}, {"path", (kScratch / "hom" / "law.json").string()}};
  const fs::path cfg_path = kScratch / "hom_from_file.json";
  std::ofstream(cfg_path) << cfg.dump(2);
  fs::remove_all(kScratch / "hom_file");
  const Run f = run("homogenize --config " + cfg_path.string() + " --out " + (kScratch / "hom_file").string(), "hom_file");
  REQUIRE_MESSAGE(f.code == 0, f.log);
  CHECK(slurp(kScratch / "hom" / "u_hom.bin") == slurp(kScratch / "hom_file" / "u_hom.bin"));
}

TEST_CASE("verify: passing and failing suites") {
  Run r = run_config("verify", "verify_quick.json", "verify_quick");
  CHECK_MESSAGE(r.code == 0, r.log);
  const std::string csv = slurp(kScratch / "verify_quick" / "verify.csv");
  CHECK(csv.find(",fail,") == std::string::npos);
  CHECK(slurp(kScratch / "verify_quick" / "verify_junit.xml").find("failures=\"0\"") != std::string::npos);
  r = run_config("verify", "verify_tight.json", "verify_tight");
  CHECK(r.code == 4);
}
