#pragma once

#include <iosfwd>
#include <memory>
#include <vector>

#include "gfcrit/critical_points.hpp"
#include "gfcrit/spectral_field.hpp"

namespace gfcrit {

/// Ellipsoid {R diag(a) s : |s| = 1}. The linear map g = diag(1/a) R^T
/// sends it onto the unit sphere.
struct Ellipsoid {
  Vec semi_axes;  // 3 positive reals
  Mat rotation;   // 3 x 3 orthogonal

  Mat to_sphere() const;
  Mat from_sphere() const;
};

Ellipsoid make_ellipsoid(const Vec& semi_axes, const Mat& rotation = Mat::Identity(3, 3));

/// Six overlapping cube-face charts. Chart c has a face centre o and edge
/// directions e, f; its parameter square is [-kChartExtent, kChartExtent]^2.
inline constexpr int kChartCount = 6;
inline constexpr double kChartExtent = 1.1;

struct ChartFrame {
  Vec origin;
  Vec e;
  Vec f;
};
ChartFrame chart_frame(int chart);

/// Z restricted to the unit sphere, or X(t) = Z(g t) on an ellipsoid,
/// both with exact chart jets.
///
/// On the sphere chart c is the gnomonic map (u, v) -> p / |p| with
/// p = o + u e + v f. On the ellipsoid it is the radial projection
/// p / |g p|, so that g(chart point) = normalize(g p); jets follow from the
/// chain rule through the normalization, including its second derivative.
class SurfaceField {
 public:
  explicit SurfaceField(std::shared_ptr<const SpectralField> base);
  SurfaceField(std::shared_ptr<const SpectralField> base, Ellipsoid ellipsoid);

  bool is_sphere() const { return !ellipsoid_.has_value(); }
  const SpectralField& base() const { return *base_; }
  const std::shared_ptr<const SpectralField>& base_ptr() const { return base_; }
  const std::optional<Ellipsoid>& ellipsoid() const { return ellipsoid_; }

  /// Point on the surface (ambient coordinates).
  Vec chart_point(int chart, const Vec& uv) const;
  /// Image of the chart point on the unit sphere.
  Vec sphere_point(int chart, const Vec& uv) const;
  FieldJet chart_jet(int chart, const Vec& uv) const;
  ValueGradient chart_value_gradient(int chart, const Vec& uv) const;

  /// Field value at an ambient point of the surface.
  double value_at(const Vec& ambient) const;
  /// g(ambient) for ellipsoids, identity on the sphere.
  Vec to_sphere(const Vec& ambient) const;
  /// Bound on |d(sphere point)/du| over the chart square.
  double chart_stretch() const;

 private:
  struct ChartGeometry {
    Vec q0, qu, qv;  // sphere point = normalize(q0 + u qu + v qv)
  };
  ChartGeometry geometry(int chart) const;

  std::shared_ptr<const SpectralField> base_;
  std::optional<Ellipsoid> ellipsoid_;
  Mat to_sphere_;
};

SurfaceField sphere_field(std::shared_ptr<const SpectralField> base);
SurfaceField ellipsoid_field(const SurfaceField& sphere, const Ellipsoid& ellipsoid);

struct SurfaceCriticalPoint {
  Vec ambient;
  int chart = 0;
  Vec uv;
  double height = 0.0;
  int index = 0;
  Vec eigenvalues;  // of the chart Hessian, ascending
  double gradient_residual = 0.0;
  int newton_iterations = 0;
};

struct SurfaceCatalog {
  std::vector<SurfaceCriticalPoint> points;  // lexicographic by ambient location
  bool refinement_stable = false;
  std::vector<CriticalCatalog> charts;  // per-chart searches, chart coordinates

  std::vector<int> counts_by_index() const;
};

struct SurfaceSearchConfig {
  /// Seed cells per chart axis at the first level.
  int cells_per_face = 40;
  SearchConfig newton;
  /// Ambient distance below which chart results are merged.
  double merge_radius = 1e-6;
};

/// Newton in chart coordinates on every face, merged across chart overlaps.
SurfaceCatalog find_surface_critical_points(const SurfaceField& field,
                                            const SurfaceSearchConfig& config = {});

int morse_sum(const SurfaceCatalog& catalog);

/// Maps ellipsoid points through g and matches them to the sphere catalog.
MatchReport verify_surface_correspondence(const SurfaceCatalog& ellipsoid_catalog,
                                          const SurfaceCatalog& sphere_catalog,
                                          const Ellipsoid& ellipsoid, double tol_loc,
                                          double tol_height = 1e-9);

/// Columns: replicate_id, x1, x2 (chart coordinates), height, index, eig1,
/// eig2, residual, iterations, ambient1..ambient3, chart.
void write_surface_csv_header(std::ostream& out);
void write_surface_csv_rows(std::ostream& out, const SurfaceCatalog& catalog, long replicate_id);

/// Plain-text mesh of the surface with per-vertex field values:
///   "v x y z" vertex, "vv value" value of the preceding vertex,
///   "f i j k" triangle with 1-based vertex indices.
/// Each face chart contributes a resolution x resolution vertex grid over [-1, 1]^2.
void write_surface_mesh(std::ostream& out, const SurfaceField& field, int resolution);

}  // namespace gfcrit
