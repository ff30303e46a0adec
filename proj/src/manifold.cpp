#include "gfcrit/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace gfcrit {

Mat Ellipsoid::to_sphere() const { return semi_axes.cwiseInverse().asDiagonal() * rotation.transpose(); }
Mat Ellipsoid::from_sphere() const { return rotation * semi_axes.asDiagonal(); }

Ellipsoid make_ellipsoid(const Vec& semi_axes, const Mat& rotation) {
  if (semi_axes.size() != 3) throw std::invalid_argument("ellipsoid needs three semi-axes");
  if (!(semi_axes.minCoeff() > 0.0)) throw std::invalid_argument("ellipsoid semi-axes must be positive");
  if (rotation.rows() != 3 || rotation.cols() != 3 ||
      !(rotation.transpose() * rotation).isApprox(Mat::Identity(3, 3), 1e-10))
    throw std::invalid_argument("ellipsoid rotation must be an orthogonal 3 x 3 matrix");
  return {semi_axes, rotation};
}

ChartFrame chart_frame(int chart) {
  if (chart < 0 || chart >= kChartCount) throw std::out_of_range("chart id must be 0..5");
  const int axis = chart / 2;
  const double sign = chart % 2 == 0 ? 1.0 : -1.0;
  ChartFrame frame{Vec::Zero(3), Vec::Zero(3), Vec::Zero(3)};
  frame.origin[axis] = sign;
  frame.e[(axis + 1) % 3] = 1.0;
  frame.f[(axis + 2) % 3] = 1.0;
  return frame;
}

SurfaceField::SurfaceField(std::shared_ptr<const SpectralField> base)
    : base_(std::move(base)), to_sphere_(Mat::Identity(3, 3)) {
  if (!base_ || base_->dim() != 3) throw std::invalid_argument("surface fields need a 3-D base realization");
}

SurfaceField::SurfaceField(std::shared_ptr<const SpectralField> base, Ellipsoid ellipsoid)
    : SurfaceField(std::move(base)) {
  to_sphere_ = ellipsoid.to_sphere();
  ellipsoid_ = std::move(ellipsoid);
}

SurfaceField::ChartGeometry SurfaceField::geometry(int chart) const {
  const ChartFrame frame = chart_frame(chart);
  return {to_sphere_ * frame.origin, to_sphere_ * frame.e, to_sphere_ * frame.f};
}

Vec SurfaceField::sphere_point(int chart, const Vec& uv) const {
  const ChartGeometry g = geometry(chart);
  const Vec q = g.q0 + uv[0] * g.qu + uv[1] * g.qv;
  return q / q.norm();
}

Vec SurfaceField::chart_point(int chart, const Vec& uv) const {
  const Vec s = sphere_point(chart, uv);
  return ellipsoid_ ? Vec(ellipsoid_->from_sphere() * s) : s;
}

Vec SurfaceField::to_sphere(const Vec& ambient) const { return to_sphere_ * ambient; }

double SurfaceField::value_at(const Vec& ambient) const { return base_->value(to_sphere(ambient)); }

double SurfaceField::chart_stretch() const {
  if (!ellipsoid_) return 1.0;
  return ellipsoid_->semi_axes.maxCoeff() / ellipsoid_->semi_axes.minCoeff();
}

FieldJet SurfaceField::chart_jet(int chart, const Vec& uv) const {
  const ChartGeometry g = geometry(chart);
  const Vec q = g.q0 + uv[0] * g.qu + uv[1] * g.qv;
  const double r = q.norm();
  const Vec n = q / r;
  const Vec dirs[2] = {g.qu, g.qv};

  // D n[x] = (x - (n.x) n) / r
  // D2 n[x, y] = (3 (n.x)(n.y) n - (n.x) y - (n.y) x - (x.y) n) / r^2
  Mat jac(3, 2);
  for (int a = 0; a < 2; ++a) jac.col(a) = (dirs[a] - n.dot(dirs[a]) * n) / r;

  const FieldJet z = base_->jet(n);
  FieldJet out;
  out.value = z.value;
  out.gradient = jac.transpose() * z.gradient;
  out.hessian = jac.transpose() * z.hessian * jac;
  for (int a = 0; a < 2; ++a)
    for (int b = a; b < 2; ++b) {
      const Vec& x = dirs[a];
      const Vec& y = dirs[b];
      const double nx = n.dot(x);
      const double ny = n.dot(y);
      const Vec second = (3.0 * nx * ny * n - nx * y - ny * x - x.dot(y) * n) / (r * r);
      out.hessian(a, b) += z.gradient.dot(second);
    }
  out.symmetrize();
  return out;
}

ValueGradient SurfaceField::chart_value_gradient(int chart, const Vec& uv) const {
  const ChartGeometry g = geometry(chart);
  const Vec q = g.q0 + uv[0] * g.qu + uv[1] * g.qv;
  const double r = q.norm();
  const Vec n = q / r;
  const ValueGradient z = base_->value_gradient(n);
  Vec grad(2);
  grad[0] = z.gradient.dot(g.qu - n.dot(g.qu) * n) / r;
  grad[1] = z.gradient.dot(g.qv - n.dot(g.qv) * n) / r;
  return {z.value, grad};
}

SurfaceField sphere_field(std::shared_ptr<const SpectralField> base) { return SurfaceField(std::move(base)); }

SurfaceField ellipsoid_field(const SurfaceField& sphere, const Ellipsoid& ellipsoid) {
  if (!sphere.is_sphere()) throw std::invalid_argument("ellipsoid_field expects a sphere field");
  return SurfaceField(sphere.base_ptr(), ellipsoid);
}

namespace {

/// One chart of a surface field seen as a field on R^2.
class ChartField final : public ScalarField {
 public:
  ChartField(const SurfaceField& surface, int chart) : surface_(surface), chart_(chart) {}

  int dim() const override { return 2; }
  FieldJet jet(const Vec& uv) const override { return surface_.chart_jet(chart_, uv); }
  ValueGradient value_gradient(const Vec& uv) const override {
    return surface_.chart_value_gradient(chart_, uv);
  }
  double axis_frequency(int) const override {
    return surface_.base().axis_frequency(0) * surface_.chart_stretch();
  }
  double gradient_scale() const override { return surface_.base().gradient_scale(); }
  double hessian_scale() const override { return surface_.base().hessian_scale(); }

 private:
  const SurfaceField& surface_;
  int chart_;
};

bool lex_less(const Vec& a, const Vec& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

}  // namespace

std::vector<int> SurfaceCatalog::counts_by_index() const {
  std::vector<int> counts(3, 0);
  for (const auto& p : points) ++counts[p.index];
  return counts;
}

SurfaceCatalog find_surface_critical_points(const SurfaceField& field, const SurfaceSearchConfig& config) {
  if (config.cells_per_face < 1) throw std::invalid_argument("cells_per_face must be positive");
  SurfaceCatalog catalog;
  catalog.refinement_stable = true;
  std::vector<SurfaceCriticalPoint> all;
  const Domain square = Domain::box(Vec::Constant(2, -kChartExtent), Vec::Constant(2, kChartExtent), 0.0);
  for (int chart = 0; chart < kChartCount; ++chart) {
    SearchConfig cfg = config.newton;
    cfg.min_cells = std::max(cfg.min_cells, config.cells_per_face);
    const ChartField chart_field(field, chart);
    CriticalCatalog found = find_critical_points(chart_field, square, cfg);
    catalog.refinement_stable = catalog.refinement_stable && found.refinement_stable;
    for (const auto& p : found.points) {
      SurfaceCriticalPoint s;
      s.ambient = field.chart_point(chart, p.location);
      s.chart = chart;
      s.uv = p.location;
      s.height = p.height;
      s.index = p.index;
      s.eigenvalues = p.eigenvalues;
      s.gradient_residual = p.gradient_residual;
      s.newton_iterations = p.newton_iterations;
      all.push_back(std::move(s));
    }
    catalog.charts.push_back(std::move(found));
  }

  // Prefer the copy found deepest inside its chart.
  const auto centrality = [](const SurfaceCriticalPoint& p) { return p.uv.cwiseAbs().maxCoeff(); };
  std::sort(all.begin(), all.end(), [&](const SurfaceCriticalPoint& a, const SurfaceCriticalPoint& b) {
    const double ca = centrality(a), cb = centrality(b);
    if (ca != cb) return ca < cb;
    return a.chart < b.chart;
  });
  for (auto& p : all) {
    const bool duplicate = std::any_of(catalog.points.begin(), catalog.points.end(), [&](const auto& q) {
      return (p.ambient - q.ambient).norm() <= config.merge_radius;
    });
    if (!duplicate) catalog.points.push_back(std::move(p));
  }
  std::sort(catalog.points.begin(), catalog.points.end(),
            [](const auto& a, const auto& b) { return lex_less(a.ambient, b.ambient); });
  return catalog;
}

int morse_sum(const SurfaceCatalog& catalog) {
  int sum = 0;
  for (const auto& p : catalog.points) sum += p.index % 2 == 0 ? 1 : -1;
  return sum;
}

MatchReport verify_surface_correspondence(const SurfaceCatalog& ellipsoid_catalog,
                                          const SurfaceCatalog& sphere_catalog,
                                          const Ellipsoid& ellipsoid, double tol_loc, double tol_height) {
  const Mat g = ellipsoid.to_sphere();
  std::vector<Vec> mapped, loc_z;
  std::vector<int> ix, iz;
  std::vector<double> hx, hz;
  for (const auto& p : ellipsoid_catalog.points) {
    if (p.ambient.size() != 3) throw std::invalid_argument("surface correspondence: dimension mismatch");
    mapped.push_back(g * p.ambient);
    ix.push_back(p.index);
    hx.push_back(p.height);
  }
  for (const auto& p : sphere_catalog.points) {
    if (p.ambient.size() != 3) throw std::invalid_argument("surface correspondence: dimension mismatch");
    loc_z.push_back(p.ambient);
    iz.push_back(p.index);
    hz.push_back(p.height);
  }
  return match_points(mapped, ix, hx, loc_z, iz, hz, tol_loc, tol_height,
                      [](const Vec& a, const Vec& b) { return (a - b).norm(); });
}

void write_surface_csv_header(std::ostream& out) {
  out << "replicate_id,x1,x2,height,index,eig1,eig2,residual,iterations,ambient1,ambient2,ambient3,chart\n";
}

void write_surface_csv_rows(std::ostream& out, const SurfaceCatalog& catalog, long replicate_id) {
  for (const auto& p : catalog.points) {
    out << replicate_id << ',' << format_double(p.uv[0]) << ',' << format_double(p.uv[1]) << ','
        << format_double(p.height) << ',' << p.index << ',' << format_double(p.eigenvalues[0]) << ','
        << format_double(p.eigenvalues[1]) << ',' << format_double(p.gradient_residual) << ','
        << p.newton_iterations;
    for (int d = 0; d < 3; ++d) out << ',' << format_double(p.ambient[d]);
    out << ',' << p.chart << '\n';
  }
}

void write_surface_mesh(std::ostream& out, const SurfaceField& field, int resolution) {
  if (resolution < 2) throw std::invalid_argument("mesh resolution must be at least 2");
  out << "# gfcrit surface mesh: v x y z / vv value / f i j k (1-based)\n";
  long base = 1;
  for (int chart = 0; chart < kChartCount; ++chart) {
    for (int i = 0; i < resolution; ++i)
      for (int j = 0; j < resolution; ++j) {
        Vec uv(2);
        uv << -1.0 + 2.0 * i / (resolution - 1), -1.0 + 2.0 * j / (resolution - 1);
        const Vec p = field.chart_point(chart, uv);
        out << "v " << format_double(p[0]) << ' ' << format_double(p[1]) << ' ' << format_double(p[2]) << '\n';
        out << "vv " << format_double(field.chart_value_gradient(chart, uv).value) << '\n';
      }
    for (int i = 0; i + 1 < resolution; ++i)
      for (int j = 0; j + 1 < resolution; ++j) {
        const long a = base + i * resolution + j;
        const long b = a + resolution;
        out << "f " << a << ' ' << b << ' ' << b + 1 << '\n';
        out << "f " << a << ' ' << b + 1 << ' ' << a + 1 << '\n';
      }
    base += static_cast<long>(resolution) * resolution;
  }
}

}  // namespace gfcrit
