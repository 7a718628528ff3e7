#include "lphom/cell_domain.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>

#include "lphom/error.hpp"

namespace lph {

namespace {

double frac(double v) { return v - std::floor(v); }

int wrap(int i, int m) {
  const int r = i % m;
  return r < 0 ? r + m : r;
}

}  // namespace

CellMesh::CellMesh(int dim, int resolution) : dim_(dim), m_(resolution) {
  check_dim(dim);
  if (resolution < 2) throw InputError("build_cell_mesh: resolution must be >= 2");
  num_nodes_ = 1;
  for (int d = 0; d < dim; ++d) num_nodes_ *= m_;
  nodes_per_elem_ = 1 << dim;
  element_volume_ = std::pow(spacing(), dim);
  conn_.resize(static_cast<std::size_t>(num_nodes_) * nodes_per_elem_);
  for (int e = 0; e < num_nodes_; ++e) {
    const auto base = node_multi_index(e);
    for (int a = 0; a < nodes_per_elem_; ++a) {
      auto idx = base;
      for (int d = 0; d < dim; ++d) idx[d] += Q1Reference::offset(a, d);
      conn_[static_cast<std::size_t>(e) * nodes_per_elem_ + a] = node_index(idx);
    }
  }
}

int CellMesh::node_index(const std::array<int, 3>& idx) const {
  int node = 0, stride = 1;
  for (int d = 0; d < dim_; ++d) {
    node += wrap(idx[d], m_) * stride;
    stride *= m_;
  }
  return node;
}

std::array<int, 3> CellMesh::node_multi_index(int node) const {
  std::array<int, 3> idx{0, 0, 0};
  for (int d = 0; d < dim_; ++d) {
    idx[d] = node % m_;
    node /= m_;
  }
  return idx;
}

Point CellMesh::node_coord(int node) const {
  const auto idx = node_multi_index(node);
  Point p{0, 0, 0};
  for (int d = 0; d < dim_; ++d) p[d] = idx[d] * spacing();
  return p;
}

int CellMesh::full_grid_size() const {
  int s = 1;
  for (int d = 0; d < dim_; ++d) s *= m_ + 1;
  return s;
}

int CellMesh::periodic_map(int full_node) const {
  if (full_node < 0 || full_node >= full_grid_size()) throw InputError("periodic_map: node out of range");
  std::array<int, 3> idx{0, 0, 0};
  for (int d = 0; d < dim_; ++d) {
    idx[d] = full_node % (m_ + 1);
    full_node /= m_ + 1;
  }
  return node_index(idx);
}

int CellMesh::canonical_full_node(int node) const {
  const auto idx = node_multi_index(node);
  int full = 0, stride = 1;
  for (int d = 0; d < dim_; ++d) {
    full += idx[d] * stride;
    stride *= m_ + 1;
  }
  return full;
}

Point CellMesh::element_centroid(int e) const {
  Point p = element_origin(e);
  for (int d = 0; d < dim_; ++d) p[d] += 0.5 * spacing();
  return p;
}

std::shared_ptr<const CellMesh> build_cell_mesh(int dim, int resolution) {
  return std::make_shared<const CellMesh>(dim, resolution);
}

// ---------------------------------------------------------------------------

int geometry_phase_count(const Geometry& g) {
  if (const auto* v = std::get_if<VoxelGrid>(&g)) return v->phase_count;
  return 2;
}

void validate_geometry(const Geometry& g, int n) {
  check_dim(n);
  std::visit(
      [n](const auto& geo) {
        using T = std::decay_t<decltype(geo)>;
        if constexpr (std::is_same_v<T, Laminate>) {
          bool nonzero = false;
          for (int d = 0; d < n; ++d) nonzero |= geo.normal[d] != 0;
          for (int d = n; d < 3; ++d)
            if (geo.normal[d] != 0) throw InputError("laminate: normal has components beyond the dimension");
          if (!nonzero) throw InputError("laminate: zero normal");
          if (!(geo.width > 0 && geo.width < 1)) throw InputError("laminate: width must lie in (0,1)");
        } else if constexpr (std::is_same_v<T, Inclusion>) {
          if (!(geo.radius > 0)) throw InputError("inclusion: radius must be positive");
          for (int d = 0; d < n; ++d)
            if (geo.center[d] - geo.radius < 0 || geo.center[d] + geo.radius > 1)
              throw InputError("inclusion: ball leaves the unit cell");
        } else if constexpr (std::is_same_v<T, Checkerboard>) {
          if (geo.blocks < 2) throw InputError("checkerboard: need at least 2 blocks per axis");
        } else {
          std::size_t total = 1;
          for (int d = 0; d < n; ++d) {
            if (geo.dims[d] < 1) throw InputError("voxel: dims must be positive");
            total *= static_cast<std::size_t>(geo.dims[d]);
          }
          if (geo.phases.size() != total) throw InputError("voxel: payload size does not match dims");
          if (geo.phase_count < 1) throw InputError("voxel: phase_count must be positive");
          for (int p : geo.phases)
            if (p < 0 || p >= geo.phase_count) throw InputError("voxel: phase id out of range");
        }
      },
      g);
}

int geometry_phase_at(const Geometry& g, const Point& y, int n) {
  Point u{0, 0, 0};
  for (int d = 0; d < n; ++d) u[d] = frac(y[d]);
  return std::visit(
      [&](const auto& geo) -> int {
        using T = std::decay_t<decltype(geo)>;
        if constexpr (std::is_same_v<T, Laminate>) {
          double s = 0;
          for (int d = 0; d < n; ++d) s += geo.normal[d] * u[d];
          return frac(s - geo.start) < geo.width ? 1 : 0;
        } else if constexpr (std::is_same_v<T, Inclusion>) {
          double r2 = 0;
          for (int d = 0; d < n; ++d) r2 += (u[d] - geo.center[d]) * (u[d] - geo.center[d]);
          return r2 < geo.radius * geo.radius ? 1 : 0;
        } else if constexpr (std::is_same_v<T, Checkerboard>) {
          int s = 0;
          for (int d = 0; d < n; ++d) s += std::min(static_cast<int>(u[d] * geo.blocks), geo.blocks - 1);
          return s % 2;
        } else {
          std::size_t lin = 0;
          for (int d = 0; d < n; ++d) {
            const int i = std::min(static_cast<int>(u[d] * geo.dims[d]), geo.dims[d] - 1);
            lin = lin * geo.dims[d] + i;
          }
          return geo.phases[lin];
        }
      },
      g);
}

nlohmann::json geometry_to_json(const Geometry& g, int n) {
  return std::visit(
      [n](const auto& geo) -> nlohmann::json {
        using T = std::decay_t<decltype(geo)>;
        if constexpr (std::is_same_v<T, Laminate>) {
          return {{"kind", "laminate"},
                  {"normal", std::vector<int>(geo.normal.begin(), geo.normal.begin() + n)},
                  {"start", geo.start},
                  {"width", geo.width}};
        } else if constexpr (std::is_same_v<T, Inclusion>) {
          return {{"kind", "inclusion"},
                  {"center", std::vector<double>(geo.center.begin(), geo.center.begin() + n)},
                  {"radius", geo.radius}};
        } else if constexpr (std::is_same_v<T, Checkerboard>) {
          return {{"kind", "checkerboard"}, {"blocks", geo.blocks}};
        } else {
          return {{"kind", "voxel"},
                  {"dims", std::vector<int>(geo.dims.begin(), geo.dims.begin() + n)},
                  {"phase_count", geo.phase_count}};
        }
      },
      g);
}

Geometry geometry_from_json(const nlohmann::json& j, int n, const std::string& base_dir) {
  const std::string kind = j.at("kind").get<std::string>();
  auto check_keys = [&](std::initializer_list<const char*> allowed) {
    for (const auto& [key, _] : j.items()) {
      bool ok = key == "kind";
      for (const char* a : allowed) ok |= key == a;
      if (!ok) throw InputError("geometry '" + kind + "': unknown key '" + key + "'");
    }
  };
  Geometry g;
  if (kind == "laminate") {
    check_keys({"normal", "axis", "start", "width"});
    Laminate lam;
    if (j.contains("axis")) {
      lam.normal = {0, 0, 0};
      lam.normal.at(j.at("axis").get<int>()) = 1;
    }
    if (j.contains("normal")) {
      const auto v = j.at("normal").get<std::vector<int>>();
      if (static_cast<int>(v.size()) != n) throw InputError("laminate: normal must have dim entries");
      lam.normal = {0, 0, 0};
      for (int d = 0; d < n; ++d) lam.normal[d] = v[d];
    }
    lam.start = j.value("start", lam.start);
    lam.width = j.value("width", lam.width);
    g = lam;
  } else if (kind == "inclusion") {
    check_keys({"center", "radius"});
    Inclusion inc;
    if (j.contains("center")) {
      const auto v = j.at("center").get<std::vector<double>>();
      if (static_cast<int>(v.size()) != n) throw InputError("inclusion: center must have dim entries");
      for (int d = 0; d < n; ++d) inc.center[d] = v[d];
    }
    inc.radius = j.value("radius", inc.radius);
    g = inc;
  } else if (kind == "checkerboard") {
    check_keys({"blocks"});
    g = Checkerboard{j.value("blocks", 2)};
  } else if (kind == "voxel") {
    check_keys({"header"});
    std::filesystem::path p = j.at("header").get<std::string>();
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    g = read_voxel_grid(p.string());
  } else {
    throw InputError("unknown geometry kind '" + kind + "'");
  }
  validate_geometry(g, n);
  return g;
}

VoxelGrid read_voxel_grid(const std::string& header_path) {
  std::ifstream hs(header_path);
  if (!hs) throw InputError("cannot open voxel header " + header_path);
  nlohmann::json h;
  try {
    hs >> h;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("voxel header " + header_path + ": " + e.what());
  }
  VoxelGrid v;
  const auto dims = h.at("dims").get<std::vector<int>>();
  if (dims.size() < 2 || dims.size() > 3) throw InputError("voxel header: dims must have 2 or 3 entries");
  std::size_t total = 1;
  for (std::size_t d = 0; d < dims.size(); ++d) {
    v.dims[d] = dims[d];
    total *= static_cast<std::size_t>(std::max(dims[d], 0));
  }
  v.phase_count = h.at("phase_count").get<int>();
  const std::string dtype = h.value("dtype", "int32");
  if (dtype != "int32") throw InputError("voxel header: only int32 payloads are supported");
  std::filesystem::path data = h.at("data").get<std::string>();
  if (data.is_relative()) data = std::filesystem::path(header_path).parent_path() / data;
  std::ifstream ds(data, std::ios::binary);
  if (!ds) throw InputError("cannot open voxel payload " + data.string());
  std::vector<std::int32_t> raw(total);
  ds.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(total * sizeof(std::int32_t)));
  if (ds.gcount() != static_cast<std::streamsize>(total * sizeof(std::int32_t)))
    throw InputError("voxel payload shorter than dims imply");
  v.phases.assign(raw.begin(), raw.end());
  validate_geometry(v, static_cast<int>(dims.size()));
  return v;
}

void write_voxel_grid(const VoxelGrid& grid, const std::string& header_path, int n) {
  validate_geometry(grid, n);
  const std::filesystem::path hp(header_path);
  const std::string raw_name = hp.stem().string() + ".raw";
  {
    std::ofstream ds(hp.parent_path() / raw_name, std::ios::binary);
    std::vector<std::int32_t> raw(grid.phases.begin(), grid.phases.end());
    ds.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * sizeof(std::int32_t)));
  }
  nlohmann::json h{{"dims", std::vector<int>(grid.dims.begin(), grid.dims.begin() + n)},
                   {"phase_count", grid.phase_count},
                   {"dtype", "int32"},
                   {"data", raw_name}};
  std::ofstream(header_path) << h.dump(2) << '\n';
}

// ---------------------------------------------------------------------------

Phase make_phase(std::string name, const Tensor4& elasticity) {
  return Phase{std::move(name), elasticity, st_venant_generator(elasticity)};
}

CellMaterial::CellMaterial(std::shared_ptr<const CellMesh> mesh, std::vector<Phase> phases, Geometry geometry)
    : mesh_(std::move(mesh)), phases_(std::move(phases)), geometry_(std::move(geometry)) {
  if (!mesh_) throw InputError("CellMaterial: null mesh");
  const int n = mesh_->dim();
  validate_geometry(geometry_, n);
  if (static_cast<int>(phases_.size()) != geometry_phase_count(geometry_))
    throw InputError("CellMaterial: geometry references " + std::to_string(geometry_phase_count(geometry_)) +
                     " phases but " + std::to_string(phases_.size()) + " were given");
  for (const auto& p : phases_) {
    if (p.elasticity.dim() != n) throw InputError("phase '" + p.name + "': dimension mismatch");
    const auto rep = check_symmetries(p.elasticity, 1e-10);
    if (!rep.minor || !rep.major) throw InputError("phase '" + p.name + "': elasticity lacks minor/major symmetry");
    if (!(coercivity_constant(p.elasticity) > 0)) throw InputError("phase '" + p.name + "': elasticity not coercive");
    if (!p.residual) throw InputError("phase '" + p.name + "': missing residual generator");
  }
  phase_ids_.resize(mesh_->num_elements());
  fractions_.assign(phases_.size(), 0.0);
  for (int e = 0; e < mesh_->num_elements(); ++e) {
    phase_ids_[e] = geometry_phase_at(geometry_, mesh_->element_centroid(e), n);
    fractions_[phase_ids_[e]] += mesh_->element_volume();
  }
  for (std::size_t p = 0; p < phases_.size(); ++p)
    if (fractions_[p] == 0.0)
      throw InputError("phase '" + phases_[p].name + "' is empty at cell resolution " +
                       std::to_string(mesh_->resolution()));
}

std::shared_ptr<const CellMaterial> assign_phases(std::shared_ptr<const CellMesh> mesh, const Geometry& geometry,
                                                  std::vector<Phase> phases) {
  return std::make_shared<const CellMaterial>(std::move(mesh), std::move(phases), geometry);
}

}  // namespace lph
