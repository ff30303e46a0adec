#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "gfcrit/diffeomorphism.hpp"
#include "gfcrit/moments.hpp"
#include "gfcrit/spectral_field.hpp"
#include "gfcrit/transformed_field.hpp"
#include "test_support.hpp"

using namespace gfcrit;
using namespace gfcrit::testing;

namespace {

SpectralField single_wave(const Vec& omega, double phase, std::optional<double> period = std::nullopt) {
  CovarianceModel model(CovarianceKind::squared_exponential, 1.0, static_cast<int>(omega.size()));
  Mat freq = omega;
  Vec ph(1);
  ph << phase;
  return SpectralField(model, freq, ph, period);
}

Vec random_point(Rng& rng, int dim, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec t(dim);
  for (int d = 0; d < dim; ++d) t[d] = u(rng);
  return t;
}

std::vector<SineTerm> warp_terms() {
  SineTerm a{0.1, Eigen::Vector2d(0.6, 0.8), 0.3, Eigen::Vector2d(1.0, 0.0)};
  SineTerm b{0.1, Eigen::Vector2d(-0.8, 0.6), 1.1, Eigen::Vector2d(0.0, 1.0)};
  return {a, b};
}

}  // namespace

TEST_CASE("squared-exponential derivatives at zero") {
  const auto m1 = make_covariance(CovarianceKind::squared_exponential, 1.0, 1);
  CHECK(m1.rho_prime0() == doctest::Approx(-0.5));
  CHECK(m1.rho_second0() == doctest::Approx(0.25));
  CHECK(m1.rho(0.0) == 1.0);
  const auto m2 = make_covariance(CovarianceKind::squared_exponential, 2.0, 2);
  CHECK(m2.rho_prime0() == doctest::Approx(-0.125));
}

TEST_CASE("band-limited rho'(0) matches quadrature of the spectral density and finite differences") {
  // density 1/2 on [-1, 1]: second moment by Simpson, independent of the model code
  const double m2 = simpson([](double w) { return 0.5 * w * w; }, -1.0, 1.0);
  const auto model = make_covariance(CovarianceKind::band_limited, 1.0, 1);
  CHECK(model.rho_prime0() == doctest::Approx(-0.5 * m2).epsilon(1e-10));

  // one-sided second-order difference in s, away from the series branch
  const double d = 1e-2;
  const double fd = (-3.0 * model.rho(0.0) + 4.0 * model.rho(d) - model.rho(2.0 * d)) / (2.0 * d);
  CHECK(std::abs(fd - model.rho_prime0()) < 1e-6);

  // radial quadrature for N = 2, 3: E[w_1^2] = E|w|^2 / N under the uniform ball law
  for (int n : {2, 3}) {
    const double radius = 1.0;
    const double mass = simpson([&](double r) { return std::pow(r, n - 1); }, 0.0, radius);
    const double second = simpson([&](double r) { return std::pow(r, n + 1); }, 0.0, radius) / mass / n;
    const auto mn = make_covariance(CovarianceKind::band_limited, 1.0, n);
    CHECK(mn.rho_prime0() == doctest::Approx(-0.5 * second).epsilon(1e-8));
    const double fdn = (-3.0 * mn.rho(0.0) + 4.0 * mn.rho(d) - mn.rho(2.0 * d)) / (2.0 * d);
    CHECK(std::abs(fdn - mn.rho_prime0()) < 1e-6);
  }
}

TEST_CASE("covariance model preconditions") {
  CHECK_THROWS_AS(make_covariance(CovarianceKind::squared_exponential, 0.0, 2), std::invalid_argument);
  CHECK_THROWS_AS(make_covariance(CovarianceKind::squared_exponential, -1.0, 2), std::invalid_argument);
  CHECK_THROWS_AS(make_covariance(CovarianceKind::band_limited, 1.0, 4), std::invalid_argument);
  CHECK_THROWS_AS(parse_covariance_kind("matern"), std::invalid_argument);
}

TEST_CASE("spectral moments against finite differences of the covariance") {
  // C(h) = exp(-h^2 / 2): C''(0) = -lambda, C''''(0) = Var(H_11)
  const auto c1 = [](double h) { return std::exp(-0.5 * h * h); };
  const double c2 = fd_second(c1, 0.0, 1e-2);
  const double c4 = fd_fourth(c1, 0.0, 5e-2);
  CHECK(c2 == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(c4 == doctest::Approx(3.0).epsilon(1e-2));

  const auto m1 = spectral_moments(make_covariance(CovarianceKind::squared_exponential, 1.0, 1));
  CHECK(m1.lambda == doctest::Approx(-c2).epsilon(1e-6));
  CHECK(m1.cov_hessian(0, 0, 0, 0) == doctest::Approx(c4).epsilon(1e-2));
  CHECK(m1.cov_value_hessian(0, 0) == doctest::Approx(c2).epsilon(1e-6));

  // mixed fourth derivative d^4 C / dh1^2 dh2^2 at 0 for C(h) = exp(-|h|^2 / 2)
  const auto c_2d = [](double x, double y) { return std::exp(-0.5 * (x * x + y * y)); };
  const double mixed = fd_second([&](double x) { return fd_second([&](double y) { return c_2d(x, y); }, 0.0, 2e-2); },
                                 0.0, 2e-2);
  const auto m2 = spectral_moments(make_covariance(CovarianceKind::squared_exponential, 1.0, 2));
  CHECK(mixed == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(m2.cov_hessian(0, 0, 1, 1) == doctest::Approx(mixed).epsilon(1e-3));
  CHECK(m2.cov_hessian(0, 1, 0, 1) == doctest::Approx(mixed).epsilon(1e-3));
  CHECK(m2.cov_value_hessian(0, 1) == 0.0);
  CHECK(m2.cov_hessian(0, 0, 0, 1) == 0.0);
}

TEST_CASE("spectral moments admissibility") {
  for (int n = 1; n <= 3; ++n) {
    CHECK_NOTHROW(spectral_moments(make_covariance(CovarianceKind::band_limited, 0.7, n)));
    CHECK_NOTHROW(spectral_moments(make_covariance(CovarianceKind::squared_exponential, 0.7, n)));
  }
  // value-Hessian coupling too strong for any valid field
  CHECK_THROWS_AS(SpectralMoments(2, 1.0, -3.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(SpectralMoments(2, 0.0, -1.0, 1.0), std::invalid_argument);
  CHECK_NOTHROW(SpectralMoments(2, 1.0, 0.0, 1.0));
}

TEST_CASE("single-wave variance identity and degenerate fields") {
  const SpectralField z = single_wave(Vec::Constant(1, 1.3), 0.4);
  CHECK(z.amplitude() == doctest::Approx(std::sqrt(2.0)));
  // E over the uniform phase of Z(t)^2 = 2 cos^2 = 1
  const double var = simpson([&](double phi) {
                       const SpectralField w = single_wave(Vec::Constant(1, 1.3), phi);
                       return w.value(Vec::Constant(1, 0.7)) * w.value(Vec::Constant(1, 0.7));
                     }, 0.0, 2.0 * std::numbers::pi) / (2.0 * std::numbers::pi);
  CHECK(var == doctest::Approx(1.0).epsilon(1e-10));

  CovarianceModel model(CovarianceKind::squared_exponential, 1.0, 2);
  const SpectralField flat(model, Mat::Zero(2, 16), Vec::LinSpaced(16, 0.0, 3.0));
  Rng rng(3);
  for (int i = 0; i < 10; ++i) {
    const Vec t = random_point(rng, 2, -5.0, 5.0);
    CHECK(flat.jet(t).gradient.norm() == 0.0);
    CHECK(flat.value(t) == doctest::Approx(flat.value(Vec::Zero(2))));
  }
}

TEST_CASE("sample_field preconditions") {
  const auto model = make_covariance(CovarianceKind::squared_exponential, 1.0, 2);
  Rng rng(1);
  CHECK_THROWS_AS(sample_field(model, 0, rng), std::invalid_argument);
  CHECK_THROWS_AS(sample_field(model, 8, rng, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(sample_field(model, 8, rng, -3.0), std::invalid_argument);
}

TEST_CASE("ensemble covariance converges to rho") {
  const auto model = make_covariance(CovarianceKind::squared_exponential, 1.0, 2);
  const Vec dir = Eigen::Vector2d(0.6, 0.8);
  const std::vector<double> lags{0.25, 0.5, 1.0, 1.5, 2.0};
  const int reps = 10000;
  std::vector<double> sum(lags.size(), 0.0), sum2(lags.size(), 0.0);
  for (int r = 0; r < reps; ++r) {
    const SpectralField z = sample_field(model, 2048, substream_seed(17, r));
    const double z0 = z.value(Vec::Zero(2));
    for (std::size_t j = 0; j < lags.size(); ++j) {
      const double p = z0 * z.value(lags[j] * dir);
      sum[j] += p;
      sum2[j] += p * p;
    }
  }
  for (std::size_t j = 0; j < lags.size(); ++j) {
    const double mean = sum[j] / reps;
    const double se = std::sqrt((sum2[j] / reps - mean * mean) / reps);
    const double target = std::exp(-0.5 * lags[j] * lags[j]);
    INFO("lag " << lags[j] << " empirical " << mean << " target " << target << " se " << se);
    CHECK(std::abs(mean - target) < 3.0 * se);
  }
}

TEST_CASE("evaluate: cosine peak jet") {
  const Vec omega = Eigen::Vector2d(1.2, -0.7);
  const Vec t = Eigen::Vector2d(0.3, 0.9);
  const SpectralField z = single_wave(omega, -omega.dot(t));
  const FieldJet j = z.jet(t);
  CHECK(j.value == doctest::Approx(std::sqrt(2.0)));
  CHECK(j.gradient.norm() < 1e-14);
  CHECK((j.hessian + std::sqrt(2.0) * omega * omega.transpose()).norm() < 1e-13);
}

TEST_CASE("evaluate: jets agree with central finite differences") {
  Rng rng(5);
  for (auto kind : {CovarianceKind::squared_exponential, CovarianceKind::band_limited})
    for (int n = 1; n <= 3; ++n) {
      const SpectralField z = sample_field(make_covariance(kind, 1.0, n), 512, 99 + n);
      for (int i = 0; i < 20; ++i) {
        const Vec t = random_point(rng, n, -10.0, 10.0);
        const FieldJet j = z.jet(t);
        const Vec g = fd_gradient([&](const Vec& s) { return z.value(s); }, t);
        const Mat h = fd_hessian_from_gradient([&](const Vec& s) { return z.jet(s).gradient; }, t);
        CHECK(relative_error(g, j.gradient, z.gradient_scale()) < 1e-6);
        CHECK(relative_error(h, j.hessian, z.hessian_scale()) < 1e-6);
        CHECK(z.value_gradient(t).value == doctest::Approx(j.value).epsilon(1e-12));
      }
    }
}

TEST_CASE("torus mode: lattice frequencies and periodicity") {
  const double period = 6.0;
  const auto model = make_covariance(CovarianceKind::squared_exponential, 1.0, 2);
  const SpectralField z = sample_field(model, 256, 7, period);
  const double step = 2.0 * std::numbers::pi / period;
  for (Eigen::Index k = 0; k < z.frequencies().size(); ++k) {
    const double q = z.frequencies().data()[k] / step;
    CHECK(std::abs(q - std::round(q)) < 1e-12);
  }
  Rng rng(8);
  for (int i = 0; i < 20; ++i) {
    const Vec t = random_point(rng, 2, 0.0, period);
    for (int axis = 0; axis < 2; ++axis) {
      Vec s = t;
      s[axis] += period;
      CHECK(z.value(s) == doctest::Approx(z.value(t)).epsilon(1e-11));
    }
  }
}

TEST_CASE("realization text format round-trips exactly") {
  for (auto period : {std::optional<double>{}, std::optional<double>{7.5}}) {
    const auto model = make_covariance(CovarianceKind::band_limited, 0.8, 3);
    const SpectralField z = sample_field(model, 64, 123, period);
    std::stringstream buf;
    z.write(buf);
    const SpectralField back = SpectralField::read(buf);
    CHECK(back.frequencies() == z.frequencies());
    CHECK(back.phases() == z.phases());
    CHECK(back.seed() == 123u);
    CHECK(back.period() == period);
    CHECK(back.model().kind() == CovarianceKind::band_limited);
  }
  std::stringstream bad("gfcrit-spectral-field 1\nkind squared-exponential\n");
  CHECK_THROWS(SpectralField::read(bad));
}

TEST_CASE("diffeomorphism: identity and linear maps") {
  const auto id = Diffeomorphism::identity(2);
  const Vec t = Eigen::Vector2d(0.4, -1.3);
  CHECK(id.jacobian(t) == Mat::Identity(2, 2));
  for (const auto& h : id.coordinate_hessians(t)) CHECK(h.norm() == 0.0);
  CHECK(id.abs_det_jacobian(t) == 1.0);

  const auto lin = Diffeomorphism::linear(Eigen::Vector2d(2.0, 3.0).asDiagonal());
  CHECK(lin.abs_det_jacobian(t) == doctest::Approx(6.0));
  CHECK(lin.abs_det_jacobian(Eigen::Vector2d(17.0, -4.0)) == doctest::Approx(6.0));
  CHECK((lin.inverse(lin.forward(t)) - t).norm() < 1e-15);

  Mat singular(2, 2);
  singular << 1.0, 2.0, 2.0, 4.0;
  CHECK_THROWS_AS(Diffeomorphism::linear(singular), std::invalid_argument);
}

TEST_CASE("diffeomorphism: sine warp inverse, Jacobian and bound") {
  const auto f = Diffeomorphism::sine_warp(2, warp_terms());
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) {
      const Vec t = Eigen::Vector2d(0.8 * i, 0.8 * j);
      CHECK((f.inverse(f.forward(t)) - t).norm() < 1e-10);
      CHECK((f.forward(f.inverse(t)) - t).norm() < 1e-10);
      const Mat jfd = fd_jacobian([&](const Vec& s) { return f.forward(s); }, t);
      CHECK(relative_error(jfd, f.jacobian(t), 1.0) < 1e-6);
      CHECK(f.abs_det_jacobian(t) > 0.5);
      const auto hess = f.coordinate_hessians(t);
      for (int k = 0; k < 2; ++k) {
        const Mat hfd = fd_jacobian([&](const Vec& s) { return Vec(f.jacobian(s).row(k).transpose()); }, t);
        CHECK(relative_error(hfd, hess[k], 1e-2) < 1e-6);
      }
    }
  SineTerm strong{0.5, Eigen::Vector2d(1.0, 0.5), 0.0, Eigen::Vector2d(1.0, 0.0)};
  CHECK_THROWS_AS(Diffeomorphism::sine_warp(2, {strong}), std::invalid_argument);
}

TEST_CASE("diffeomorphism: composition chain rule") {
  Mat a(2, 2);
  a << 1.2, 0.3, -0.4, 0.9;
  const auto f = Diffeomorphism::compose(Diffeomorphism::sine_warp(2, warp_terms()), Diffeomorphism::linear(a));
  Rng rng(11);
  for (int i = 0; i < 20; ++i) {
    const Vec t = random_point(rng, 2, -4.0, 4.0);
    CHECK((f.inverse(f.forward(t)) - t).norm() < 1e-10);
    const MapJet jet = f.jet(t);
    CHECK(relative_error(fd_jacobian([&](const Vec& s) { return f.forward(s); }, t), jet.jacobian, 1.0) < 1e-6);
    for (int k = 0; k < 2; ++k) {
      const Mat hfd = fd_jacobian([&](const Vec& s) { return Vec(f.jacobian(s).row(k).transpose()); }, t);
      CHECK(relative_error(hfd, jet.hessians[k], 1e-2) < 1e-6);
    }
  }
  const auto both_linear = Diffeomorphism::compose(Diffeomorphism::linear(a), Diffeomorphism::linear(a));
  CHECK(both_linear.is_linear());
  CHECK((both_linear.matrix() - a * a).norm() < 1e-15);
}

TEST_CASE("transform_field: chain-rule jets") {
  const auto model = make_covariance(CovarianceKind::squared_exponential, 1.0, 2);
  auto z = std::make_shared<const SpectralField>(sample_field(model, 512, 21));
  Rng rng(4);

  const TransformedField same(z, Diffeomorphism::identity(2));
  for (int i = 0; i < 10; ++i) {
    const Vec t = random_point(rng, 2, 0.0, 8.0);
    const FieldJet a = same.jet(t), b = z->jet(t);
    CHECK(a.value == b.value);
    CHECK(a.gradient == b.gradient);
    CHECK(a.hessian == b.hessian);
  }

  Mat m(2, 2);
  m << 2.0, 0.5, -0.3, 3.0;
  const TransformedField lin(z, Diffeomorphism::linear(m));
  for (int i = 0; i < 10; ++i) {
    const Vec t = random_point(rng, 2, 0.0, 8.0);
    const FieldJet x = lin.jet(t);
    const FieldJet base = z->jet(m * t);
    CHECK((x.hessian - m.transpose() * base.hessian * m).norm() < 1e-12 * base.hessian.norm() * 16.0);
    CHECK(lin.curvature_term(t).norm() == 0.0);
  }

  const TransformedField warped(z, Diffeomorphism::sine_warp(2, warp_terms()));
  for (int i = 0; i < 50; ++i) {
    const Vec t = random_point(rng, 2, 0.0, 8.0);
    const FieldJet x = warped.jet(t);
    const MapJet f = warped.map().jet(t);
    const FieldJet base = z->jet(f.value);
    CHECK((x.gradient - f.jacobian.transpose() * base.gradient).norm() < 1e-12);
    const Mat decomposition = x.hessian - warped.congruence_hessian(t);
    CHECK((decomposition - warped.curvature_term(t)).norm() < 1e-12 * std::max(1.0, x.hessian.norm()));
    const Vec g = fd_gradient([&](const Vec& s) { return warped.jet(s).value; }, t);
    const Mat h = fd_hessian_from_gradient([&](const Vec& s) { return warped.jet(s).gradient; }, t);
    CHECK(relative_error(g, x.gradient, warped.gradient_scale()) < 1e-6);
    CHECK(relative_error(h, x.hessian, warped.hessian_scale()) < 1e-6);
  }
  CHECK_THROWS_AS(TransformedField(z, Diffeomorphism::identity(3)), std::invalid_argument);
}

TEST_CASE("transform_field: reduced Hessian relation at a critical point of a warped field") {
  const auto model = make_covariance(CovarianceKind::squared_exponential, 1.0, 2);
  auto z = std::make_shared<const SpectralField>(sample_field(model, 2048, 33));
  const TransformedField x(z, Diffeomorphism::sine_warp(2, warp_terms()));
  // plain Newton from a few starting points; keep the ones that converge
  int found = 0;
  for (int s = 0; s < 25 && found < 3; ++s) {
    Vec t = Eigen::Vector2d(1.0 + 1.5 * (s % 5), 1.0 + 1.5 * (s / 5));
    for (int it = 0; it < 30; ++it) {
      const FieldJet j = x.jet(t);
      if (j.gradient.norm() < 1e-12) break;
      const Vec step = j.hessian.fullPivLu().solve(-j.gradient);
      if (step.norm() > 0.3) break;
      t += step;
    }
    const FieldJet j = x.jet(t);
    if (j.gradient.norm() > 1e-11) continue;
    ++found;
    const Mat reduced = x.congruence_hessian(t);
    CHECK((reduced - j.hessian).norm() < 1e-8 * j.hessian.norm());
    const Mat h = fd_hessian_from_gradient([&](const Vec& s) { return x.jet(s).gradient; }, t);
    CHECK(relative_error(h, reduced, x.hessian_scale()) < 1e-6);
  }
  CHECK(found > 0);
}

TEST_CASE("gradient is uncorrelated with value and Hessian at a point") {
  const auto model = make_covariance(CovarianceKind::squared_exponential, 1.0, 2);
  const int reps = 10000;
  const Vec t = Eigen::Vector2d(0.3, -1.1);
  // E[g_k * y] for y in {value, H11, H12, H22}, every pair should be zero
  std::array<std::array<double, 4>, 2> s{}, s2{};
  for (int r = 0; r < reps; ++r) {
    const FieldJet j = sample_field(model, 2048, substream_seed(41, r)).jet(t);
    const std::array<double, 4> y{j.value, j.hessian(0, 0), j.hessian(0, 1), j.hessian(1, 1)};
    for (int k = 0; k < 2; ++k)
      for (int m = 0; m < 4; ++m) {
        const double p = j.gradient[k] * y[m];
        s[k][m] += p;
        s2[k][m] += p * p;
      }
  }
  for (int k = 0; k < 2; ++k)
    for (int m = 0; m < 4; ++m) {
      const double mean = s[k][m] / reps;
      const double se = std::sqrt((s2[k][m] / reps - mean * mean) / reps);
      CHECK(std::abs(mean) < 4.0 * se);
    }
}
