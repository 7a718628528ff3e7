#pragma once

// Command configuration mirrored from one JSON document. Parsing is strict:
// unknown keys, wrong types and out-of-range values raise InputError before
// anything is computed.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lphom/fem_macro.hpp"
#include "lphom/verify.hpp"

namespace lph::cli {

struct SolverSection {
  double tolerance = 1e-10;
  int max_iterations = 50000;
};

struct CellSection {
  std::optional<Point> x;  // default: center of the macro domain
  std::optional<Tensor2> E;
  bool dump_correctors = true;
  bool strain_csv = false;
};

struct LawSection {
  std::string strategy = "fast_path";  // fast_path | pointwise | table | file
  std::optional<Point> x0;
  std::array<int, 3> counts{5, 5, 5};
  std::string path;
};

struct MacroSection {
  Box domain;
  std::array<int, 3> cells{32, 32, 32};
  nlohmann::json boundary{{"kind", "zero"}};
  nlohmann::json body_force{{"kind", "constant"}};  // value (1, 0[, 0]) unless given
  bool include_residual = true;
};

struct MicroSection {
  double eps = 0.125;
  double r = 0.6;
  AnchorOptions anchors;
  nlohmann::json anchors_json = nlohmann::json::object();
  int min_elements_per_period = 8;
  int points_per_axis = 2;
};

struct ConvergeSection {
  std::vector<double> eps{1.0 / 8, 1.0 / 16, 1.0 / 32};
  int elements_per_period = 8;
  int homogenized_cells = 0;
  double budget_seconds = 0;
};

struct VerifySection {
  std::vector<std::string> suites{"invariants", "acceptance"};  // acceptance includes the laminate oracle
  bool include_convergence = true;
  double tolerance = 0;
  double major_perturbation = 0;
};

struct RunConfig {
  nlohmann::json source;  // the document as read, for the manifest
  std::string base_dir;
  int dim = 2;
  std::uint64_t seed = 20240611;
  int jobs = 0;
  std::string output_dir = "lphom_out";

  std::shared_ptr<const CellMaterial> material;  // absent when no "material" section
  FieldPtr H, K;
  SolverSection solver;
  CellSection cell;
  LawSection law;
  MacroSection macro;
  MicroSection micro;
  ConvergeSection converge;
  VerifySection verify;
};

/// `base_dir` resolves relative paths (voxel files, law files). A manifest
/// written by a previous run is accepted as well; its recorded config is used.
RunConfig parse_run_config(const nlohmann::json& j, const std::string& base_dir = ".");
RunConfig load_run_config(const std::string& path);

}  // namespace lph::cli
