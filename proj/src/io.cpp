#include "kinlab/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "kinlab/errors.hpp"

namespace kinlab::io {

namespace fs = std::filesystem;

void write_atomic(const fs::path& path, const std::string& content)
{
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string format_double(double x)
{
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string fields_to_csv(const MacroFields& fields, const SpatialGrid& sgrid)
{
  std::ostringstream os;
  os << "cell,x [length],rho [mass/length^d]";
  for (int i = 0; i < fields.dim(); ++i) os << ",u_" << (i + 1) << " [length/time]";
  os << ",T [temperature]\n";
  for (int c = 0; c < fields.n_cells(); ++c) {
    os << c << ',' << format_double(sgrid.cell_centers()(c)) << ',' << format_double(fields.rho(c));
    for (int i = 0; i < fields.dim(); ++i) os << ',' << format_double(fields.u(c, i));
    os << ',' << format_double(fields.T(c)) << '\n';
  }
  return os.str();
}

std::string dist_to_csv(const DistField& f)
{
  std::ostringstream os;
  os << "cell,node,x [length]";
  for (int i = 0; i < f.dim(); ++i) os << ",v_" << (i + 1) << " [length/time]";
  os << ",weight [velocity^d],f [phase-space density]\n";
  for (int c = 0; c < f.n_cells(); ++c) {
    const VelocityGrid& g = f.vgrid(c);
    for (int k = 0; k < f.n_nodes(); ++k) {
      os << c << ',' << k << ',' << format_double(f.sgrid().cell_centers()(c));
      for (int i = 0; i < f.dim(); ++i) os << ',' << format_double(g.nodes()(k, i));
      os << ',' << format_double(g.weights()(k)) << ',' << format_double(f.values()(c, k)) << '\n';
    }
  }
  return os.str();
}

json vec_to_json(const Vec& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vec vec_from_json(const json& j)
{
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json mat_to_json(const Mat& m)
{
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return json{{"shape", {m.rows(), m.cols()}}, {"data", data}};
}

Mat mat_from_json(const json& j)
{
  const auto shape = j.at("shape").get<std::vector<Eigen::Index>>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (shape.size() != 2 || static_cast<Eigen::Index>(data.size()) != shape[0] * shape[1])
    throw Error("matrix JSON: shape does not match data");
  Mat m(shape[0], shape[1]);
  for (Eigen::Index r = 0; r < shape[0]; ++r)
    for (Eigen::Index c = 0; c < shape[1]; ++c) m(r, c) = data[r * shape[1] + c];
  return m;
}

namespace {

json sgrid_to_json(const SpatialGrid& s)
{
  return json{{"dim_x", s.dim_x()}, {"n_cells", s.n_cells()}, {"length", s.length()}, {"axis", s.axis()}};
}

SpatialGrid sgrid_from_json(const json& j)
{
  return SpatialGrid(j.at("n_cells").get<int>(), j.at("length").get<double>(), j.value("axis", 0));
}

json vgrid_to_json(const VelocityGrid& g)
{
  return json{{"dim", g.dim()},
              {"kind", g.kind() == GridKind::GaussHermiteTensor ? "gauss-hermite-tensor" : "uniform-truncated"},
              {"nodes", mat_to_json(g.nodes())},
              {"weights", vec_to_json(g.weights())}};
}

VelocityGridPtr vgrid_from_json(const json& j)
{
  const std::string kind = j.at("kind").get<std::string>();
  GridKind k;
  if (kind == "gauss-hermite-tensor")
    k = GridKind::GaussHermiteTensor;
  else if (kind == "uniform-truncated")
    k = GridKind::UniformTruncated;
  else
    throw Error("unknown velocity grid kind '" + kind + "'");
  return std::make_shared<const VelocityGrid>(mat_from_json(j.at("nodes")), vec_from_json(j.at("weights")), k);
}

}  // namespace

json fields_to_json(const MacroFields& fields, const SpatialGrid& sgrid)
{
  return json{{"spatial_grid", sgrid_to_json(sgrid)},
              {"R", fields.R},
              {"d", fields.dim()},
              {"rho", vec_to_json(fields.rho)},
              {"u", mat_to_json(fields.u)},
              {"T", vec_to_json(fields.T)}};
}

MacroFields fields_from_json(const json& j)
{
  return MacroFields(vec_from_json(j.at("rho")), mat_from_json(j.at("u")), vec_from_json(j.at("T")),
                     j.at("R").get<double>());
}

json dist_to_json(const DistField& f)
{
  json grids = json::array();
  for (const auto& g : f.layout()) grids.push_back(vgrid_to_json(*g));
  json values = json::array();
  for (int c = 0; c < f.n_cells(); ++c)
    for (int k = 0; k < f.n_nodes(); ++k) values.push_back(f.values()(c, k));
  return json{{"spatial_grid", sgrid_to_json(f.sgrid())},
              {"layout", f.shared_grid() ? "shared" : "per-cell"},
              {"velocity_grids", grids},
              {"order", "row-major (cell, node)"},
              {"shape", {f.n_cells(), f.n_nodes()}},
              {"values", values}};
}

DistField dist_from_json(const json& j)
{
  SpatialGrid sgrid = sgrid_from_json(j.at("spatial_grid"));
  VelocityLayout layout;
  for (const auto& g : j.at("velocity_grids")) layout.push_back(vgrid_from_json(g));
  const auto shape = j.at("shape").get<std::vector<int>>();
  const auto values = j.at("values").get<std::vector<double>>();
  if (shape.size() != 2 || static_cast<std::size_t>(shape[0]) * shape[1] != values.size())
    throw Error("distribution JSON: shape does not match values");
  CellNodeArray v(shape[0], shape[1]);
  for (int c = 0; c < shape[0]; ++c)
    for (int k = 0; k < shape[1]; ++k) v(c, k) = values[static_cast<std::size_t>(c) * shape[1] + k];
  return DistField(std::move(sgrid), std::move(layout), std::move(v));
}

}  // namespace kinlab::io
