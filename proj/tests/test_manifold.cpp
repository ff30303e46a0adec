#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "gfcrit/manifold.hpp"
#include "test_support.hpp"

using namespace gfcrit;
using namespace gfcrit::testing;

namespace {

std::shared_ptr<const SpectralField> base_field(std::uint64_t seed, double length = 0.5, int waves = 2048) {
  const auto model = make_covariance(CovarianceKind::squared_exponential, length, 3);
  return std::make_shared<const SpectralField>(sample_field(model, waves, seed));
}

// chart coordinates of an ambient point for the radial cube-face charts
Vec chart_coords(int chart, const Vec& p) {
  const ChartFrame fr = chart_frame(chart);
  const double o = p.dot(fr.origin);
  return Eigen::Vector2d(p.dot(fr.e) / o, p.dot(fr.f) / o);
}

Mat rotation_xyz(double a, double b, double c) {
  return (Eigen::AngleAxisd(a, Eigen::Vector3d::UnitX()) * Eigen::AngleAxisd(b, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(c, Eigen::Vector3d::UnitZ()))
      .toRotationMatrix();
}

}  // namespace

TEST_CASE("chart frames cover the sphere") {
  Rng rng(2);
  std::normal_distribution<double> g;
  for (int k = 0; k < 1000; ++k) {
    const Vec p = Eigen::Vector3d(g(rng), g(rng), g(rng)).normalized();
    int inside = 0;
    for (int c = 0; c < kChartCount; ++c) {
      if (p.dot(chart_frame(c).origin) <= 0.0) continue;
      const Vec uv = chart_coords(c, p);
      inside += uv.cwiseAbs().maxCoeff() < 1.0;
    }
    CHECK(inside >= 1);
  }
}

TEST_CASE("sphere chart jets agree with finite differences") {
  const SurfaceField s = sphere_field(base_field(1));
  Rng rng(3);
  std::uniform_real_distribution<double> u(-kChartExtent, kChartExtent);
  for (int c = 0; c < kChartCount; ++c)
    for (int k = 0; k < 20; ++k) {
      const Vec uv = Eigen::Vector2d(u(rng), u(rng));
      const FieldJet j = s.chart_jet(c, uv);
      const Vec g = fd_gradient([&](const Vec& w) { return s.chart_jet(c, w).value; }, uv);
      const Mat h = fd_hessian_from_gradient([&](const Vec& w) { return s.chart_jet(c, w).gradient; }, uv);
      const double gs = std::max(1.0, j.gradient.norm());
      const double hs = std::max(1.0, j.hessian.norm());
      CHECK(relative_error(g, j.gradient, gs) < 1e-6);
      CHECK(relative_error(h, j.hessian, hs) < 1e-6);
      CHECK(std::abs(s.sphere_point(c, uv).norm() - 1.0) < 1e-14);
      CHECK(s.chart_value_gradient(c, uv).value == doctest::Approx(j.value).epsilon(1e-13));
    }
}

TEST_CASE("values agree across overlapping charts") {
  const SurfaceField s = sphere_field(base_field(4));
  const SurfaceField e = ellipsoid_field(s, make_ellipsoid(Eigen::Vector3d(2.0, 1.0, 0.5), rotation_xyz(0.3, -0.2, 1.0)));
  for (const SurfaceField* field : {&s, &e})
    for (int c = 0; c < kChartCount; ++c)
      for (double u : {-1.05, -0.95, 0.95, 1.05})
        for (double v : {-0.6, 0.0, 0.7}) {
          const Vec uv = Eigen::Vector2d(u, v);
          const Vec p = field->chart_point(c, uv);
          const double value = field->chart_jet(c, uv).value;
          CHECK(field->value_at(p) == doctest::Approx(value).epsilon(1e-12));
          for (int d = 0; d < kChartCount; ++d) {
            if (d == c || p.dot(chart_frame(d).origin) <= 0.0) continue;
            const Vec w = chart_coords(d, p);
            if (w.cwiseAbs().maxCoeff() > kChartExtent) continue;
            CHECK(std::abs(field->chart_jet(d, w).value - value) < 1e-12);
            CHECK((field->chart_point(d, w) - p).norm() < 1e-12);
          }
        }
}

TEST_CASE("constant base field is degenerate on the sphere") {
  const auto model = make_covariance(CovarianceKind::squared_exponential, 1.0, 3);
  auto z = std::make_shared<const SpectralField>(model, Mat::Zero(3, 4), Vec::LinSpaced(4, 0.0, 1.0));
  const SurfaceField s = sphere_field(z);
  CHECK(s.chart_jet(0, Eigen::Vector2d(0.2, 0.3)).gradient.norm() == 0.0);
  CHECK_THROWS_AS(find_surface_critical_points(s), NonMorseError);
  const auto flat = std::make_shared<const SpectralField>(sample_field(make_covariance(CovarianceKind::squared_exponential, 1.0, 2), 8, 1));
  CHECK_THROWS_AS(sphere_field(flat), std::invalid_argument);
}

TEST_CASE("single wave restricted to the sphere: two poles") {
  // Z(x) = sqrt(2) cos(z + pi/2) = -sqrt(2) sin z; tangential gradient vanishes only at +-e3
  const auto model = make_covariance(CovarianceKind::squared_exponential, 1.0, 3);
  auto z = std::make_shared<const SpectralField>(model, Mat(Eigen::Vector3d(0.0, 0.0, 1.0)),
                                                 Vec::Constant(1, std::numbers::pi / 2.0));
  const auto cat = find_surface_critical_points(sphere_field(z));
  REQUIRE(cat.points.size() == 2);
  for (const auto& p : cat.points) {
    const double pole = p.ambient[2] > 0 ? 1.0 : -1.0;
    CHECK((p.ambient - Eigen::Vector3d(0, 0, pole)).norm() < 1e-10);
    CHECK(p.height == doctest::Approx(-pole * std::sqrt(2.0) * std::sin(1.0)).epsilon(1e-12));
    CHECK(p.index == (pole > 0 ? 0 : 2));
  }
  CHECK(morse_sum(cat) == 2);
}

TEST_CASE("sphere catalogs: Euler characteristic and ambient Hessian cross-check") {
  for (std::uint64_t seed : {11u, 12u}) {
    const SurfaceField s = sphere_field(base_field(seed));
    const auto cat = find_surface_critical_points(s);
    CHECK(cat.refinement_stable);
    CHECK(morse_sum(cat) == 2);
    CHECK(cat.points.size() > 10);
    for (const auto& p : cat.points) {
      CHECK(std::abs(p.ambient.norm() - 1.0) < 1e-10);
      // Riemannian Hessian of the restriction at a critical point: Hess Z - (x . grad Z) I on the tangent plane
      const FieldJet amb = s.base().jet(p.ambient);
      const Mat jac = fd_jacobian([&](const Vec& w) { return s.sphere_point(p.chart, w); }, p.uv);
      const Mat expected = jac.transpose() * (amb.hessian - p.ambient.dot(amb.gradient) * Mat::Identity(3, 3)) * jac;
      const FieldJet chart = s.chart_jet(p.chart, p.uv);
      CHECK(relative_error(expected, chart.hessian, std::max(1.0, chart.hessian.norm())) < 1e-6);
      CHECK(chart.gradient.norm() < 1e-9);
    }
  }
}

TEST_CASE("ellipsoid field is the base field pulled back through g") {
  const SurfaceField s = sphere_field(base_field(21));
  const SurfaceField unit = ellipsoid_field(s, make_ellipsoid(Eigen::Vector3d(1.0, 1.0, 1.0)));
  for (int c = 0; c < kChartCount; ++c) {
    const Vec uv = Eigen::Vector2d(0.3, -0.7);
    CHECK((unit.chart_point(c, uv) - s.chart_point(c, uv)).norm() < 1e-15);
    CHECK(std::abs(unit.chart_jet(c, uv).value - s.chart_jet(c, uv).value) < 1e-15);
  }

  const Ellipsoid ell = make_ellipsoid(Eigen::Vector3d(2.0, 1.0, 0.5), rotation_xyz(0.5, 0.1, -0.8));
  const SurfaceField e = ellipsoid_field(s, ell);
  const Mat g = ell.to_sphere();
  Rng rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> pick(0, kChartCount - 1);
  for (int k = 0; k < 1000; ++k) {
    const int c = pick(rng);
    const Vec uv = Eigen::Vector2d(u(rng), u(rng));
    const Vec t = e.chart_point(c, uv);
    CHECK(std::abs((g * t).norm() - 1.0) < 1e-10);
    CHECK(std::abs(e.chart_jet(c, uv).value - s.base().value(g * t)) < 1e-12);
  }
  for (int c = 0; c < kChartCount; ++c)
    for (int k = 0; k < 10; ++k) {
      const Vec uv = Eigen::Vector2d(1.1 * u(rng), 1.1 * u(rng));
      const FieldJet j = e.chart_jet(c, uv);
      const Mat h = fd_hessian_from_gradient([&](const Vec& w) { return e.chart_jet(c, w).gradient; }, uv);
      const Vec gr = fd_gradient([&](const Vec& w) { return e.chart_jet(c, w).value; }, uv);
      CHECK(relative_error(gr, j.gradient, std::max(1.0, j.gradient.norm())) < 1e-6);
      CHECK(relative_error(h, j.hessian, std::max(1.0, j.hessian.norm())) < 1e-6);
    }
  CHECK_THROWS_AS(make_ellipsoid(Eigen::Vector3d(1.0, 0.0, 1.0)), std::invalid_argument);
  CHECK_THROWS_AS(make_ellipsoid(Eigen::Vector3d(1.0, 1.0, 1.0), 2.0 * Mat::Identity(3, 3)), std::invalid_argument);
}

TEST_CASE("ellipsoid and sphere catalogs correspond point by point") {
  for (std::uint64_t seed : {31u, 32u}) {
    const SurfaceField s = sphere_field(base_field(seed));
    const auto sph = find_surface_critical_points(s);

    const Ellipsoid unit = make_ellipsoid(Eigen::Vector3d(1.0, 1.0, 1.0));
    const auto same = verify_surface_correspondence(find_surface_critical_points(ellipsoid_field(s, unit)), sph, unit, 1e-6);
    CHECK(same.pass);
    CHECK(same.max_distance < 1e-12);

    for (const Mat& rot : {Mat(Mat::Identity(3, 3)), rotation_xyz(0.7, -0.4, 0.2)}) {
      const Ellipsoid ell = make_ellipsoid(Eigen::Vector3d(2.0, 1.0, 0.5), rot);
      const auto cat = find_surface_critical_points(ellipsoid_field(s, ell));
      CHECK(cat.refinement_stable);
      CHECK(morse_sum(cat) == 2);
      const auto report = verify_surface_correspondence(cat, sph, ell, 1e-6);
      INFO(report.summary());
      CHECK(report.pass);
      CHECK(cat.counts_by_index() == sph.counts_by_index());

      auto dropped = sph;
      dropped.points.erase(dropped.points.begin() + 1);
      const auto bad = verify_surface_correspondence(cat, dropped, ell, 1e-6);
      CHECK_FALSE(bad.pass);
      CHECK(bad.unmatched_x.size() == 1);
    }
  }
}

TEST_CASE("surface CSV and mesh output") {
  const SurfaceField s = sphere_field(base_field(41, 1.0, 256));
  const auto cat = find_surface_critical_points(s);
  std::ostringstream csv;
  write_surface_csv_header(csv);
  write_surface_csv_rows(csv, cat, 3);
  std::istringstream in(csv.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "replicate_id,x1,x2,height,index,eig1,eig2,residual,iterations,ambient1,ambient2,ambient3,chart");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == static_cast<int>(cat.points.size()));

  std::ostringstream mesh;
  write_surface_mesh(mesh, s, 4);
  std::istringstream min(mesh.str());
  int v = 0, vv = 0, f = 0;
  while (std::getline(min, line)) {
    if (line.rfind("v ", 0) == 0) ++v;
    if (line.rfind("vv ", 0) == 0) ++vv;
    if (line.rfind("f ", 0) == 0) ++f;
  }
  CHECK(v == vv);
  CHECK(v > 0);
  CHECK(f > 0);
}
