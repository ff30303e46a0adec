#include "gfcrit/spectral_field.hpp"

#include "wave_kernel.hpp"

#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace gfcrit {

void FieldJet::symmetrize() {
  const auto n = hessian.rows();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) hessian(j, i) = hessian(i, j);
}

std::size_t GridAxes::node_count() const {
  std::size_t n = 1;
  for (const auto& c : coords) n *= c.size();
  return n;
}

ValueGradient ScalarField::value_gradient(const Vec& t) const {
  FieldJet j = jet(t);
  return {j.value, std::move(j.gradient)};
}

std::vector<double> ScalarField::gradient_grid(const GridAxes& axes) const {
  const int n = axes.dim();
  const std::size_t count = axes.node_count();
  std::vector<double> out(count * n);
  Vec t(n);
  std::vector<std::size_t> idx(n, 0);
  for (std::size_t node = 0; node < count; ++node) {
    std::size_t rem = node;
    for (int d = n - 1; d >= 0; --d) {
      idx[d] = rem % axes.coords[d].size();
      rem /= axes.coords[d].size();
    }
    for (int d = 0; d < n; ++d) t[d] = axes.coords[d][idx[d]];
    const Vec g = value_gradient(t).gradient;
    for (int d = 0; d < n; ++d) out[node * n + d] = g[d];
  }
  return out;
}

SpectralField::SpectralField(CovarianceModel model, Mat frequencies, Vec phases,
                             std::optional<double> period, std::uint64_t seed)
    : model_(model),
      frequencies_(std::move(frequencies)),
      phases_(std::move(phases)),
      amplitude_(0.0),
      period_(period),
      seed_(seed) {
  if (frequencies_.cols() < 1) throw std::invalid_argument("spectral field needs at least one wave");
  if (frequencies_.rows() != model_.dim())
    throw std::invalid_argument("frequency dimension does not match the covariance model");
  if (phases_.size() != frequencies_.cols())
    throw std::invalid_argument("one phase per wave is required");
  if (period_ && !(*period_ > 0.0)) throw std::invalid_argument("torus period must be positive");
  amplitude_ = std::sqrt(2.0 / static_cast<double>(frequencies_.cols()));
  packed_.resize(static_cast<std::size_t>(frequencies_.size()));
  for (Eigen::Index d = 0; d < frequencies_.rows(); ++d)
    for (Eigen::Index k = 0; k < frequencies_.cols(); ++k)
      packed_[static_cast<std::size_t>(d * frequencies_.cols() + k)] = frequencies_(d, k);
}

double SpectralField::value(const Vec& t) const { return value_gradient(t).value; }

FieldJet SpectralField::jet(const Vec& t) const {
  const int n = dim();
  if (t.size() != n) throw std::invalid_argument("evaluate: point dimension mismatch");
  const detail::WaveSums sums = detail::wave_sums(packed_.data(), phases_.data(), waves(), n, t.data(), true);
  FieldJet out;
  out.value = amplitude_ * sums.cos_sum;
  out.gradient.resize(n);
  out.hessian.resize(n, n);
  int pos = 0;
  for (int i = 0; i < n; ++i) {
    out.gradient[i] = -amplitude_ * sums.sin_grad[i];
    for (int j = i; j < n; ++j) out.hessian(i, j) = -amplitude_ * sums.cos_hess[pos++];
  }
  out.symmetrize();
  return out;
}

ValueGradient SpectralField::value_gradient(const Vec& t) const {
  const int n = dim();
  if (t.size() != n) throw std::invalid_argument("evaluate: point dimension mismatch");
  const detail::WaveSums sums = detail::wave_sums(packed_.data(), phases_.data(), waves(), n, t.data(), false);
  ValueGradient out{amplitude_ * sums.cos_sum, Vec(n)};
  for (int i = 0; i < n; ++i) out.gradient[i] = -amplitude_ * sums.sin_grad[i];
  return out;
}

double SpectralField::axis_frequency(int) const { return model_.max_frequency(); }
double SpectralField::gradient_scale() const { return std::sqrt(model_.spectral_second_moment()); }
double SpectralField::hessian_scale() const { return std::sqrt(12.0 * model_.rho_second0()); }

SpectralField sample_field(const CovarianceModel& model, int waves, Rng& rng,
                           std::optional<double> torus_period, std::uint64_t seed_tag) {
  if (waves < 1) throw std::invalid_argument("sample_field: K must be at least 1");
  if (torus_period && !(*torus_period > 0.0))
    throw std::invalid_argument("sample_field: torus period must be positive");
  const int n = model.dim();
  Mat freq(n, waves);
  Vec phase(waves);
  std::uniform_real_distribution<double> unif(0.0, 2.0 * std::numbers::pi);
  for (int k = 0; k < waves; ++k) {
    Vec w = model.sample_frequency(rng);
    if (torus_period) {
      const double step = 2.0 * std::numbers::pi / *torus_period;
      for (int d = 0; d < n; ++d) w[d] = std::round(w[d] / step) * step;
    }
    freq.col(k) = w;
    phase[k] = unif(rng);
  }
  return SpectralField(model, std::move(freq), std::move(phase), torus_period, seed_tag);
}

SpectralField sample_field(const CovarianceModel& model, int waves, std::uint64_t seed,
                           std::optional<double> torus_period) {
  Rng rng(seed);
  return sample_field(model, waves, rng, torus_period, seed);
}

void SpectralField::write(std::ostream& out) const {
  out << "gfcrit-spectral-field 1\n";
  out << "kind " << to_string(model_.kind()) << '\n';
  out << "length_scale " << format_double(model_.length_scale()) << '\n';
  out << "dim " << dim() << '\n';
  out << "waves " << waves() << '\n';
  out << "seed " << seed_ << '\n';
  out << "period " << (period_ ? format_double(*period_) : std::string("none")) << '\n';
  for (int k = 0; k < waves(); ++k) {
    for (int d = 0; d < dim(); ++d) out << format_double(frequencies_(d, k)) << ' ';
    out << format_double(phases_[k]) << '\n';
  }
}

SpectralField SpectralField::read(std::istream& in) {
  const auto expect = [&](const char* key) {
    std::string word;
    if (!(in >> word) || word != key)
      throw std::runtime_error(std::string("spectral field: expected '") + key + "'");
  };
  expect("gfcrit-spectral-field");
  int version = 0;
  in >> version;
  if (version != 1) throw std::runtime_error("spectral field: unsupported version");
  std::string kind, period_text;
  double length_scale = 0.0;
  int dim = 0, waves = 0;
  std::uint64_t seed = 0;
  expect("kind");
  in >> kind;
  expect("length_scale");
  in >> length_scale;
  expect("dim");
  in >> dim;
  expect("waves");
  in >> waves;
  expect("seed");
  in >> seed;
  expect("period");
  in >> period_text;
  if (!in || waves < 1) throw std::runtime_error("spectral field: malformed header");
  std::optional<double> period;
  if (period_text != "none") period = std::stod(period_text);
  CovarianceModel model(parse_covariance_kind(kind), length_scale, dim);
  Mat freq(dim, waves);
  Vec phase(waves);
  for (int k = 0; k < waves; ++k) {
    for (int d = 0; d < dim; ++d) in >> freq(d, k);
    in >> phase[k];
  }
  if (!in) throw std::runtime_error("spectral field: truncated wave table");
  return SpectralField(model, std::move(freq), std::move(phase), period, seed);
}

}  // namespace gfcrit
