#include "gfcrit/diffeomorphism.hpp"

#include <cmath>
#include <string>

namespace gfcrit {

namespace {

void check_dim(int dim) {
  if (dim < 1 || dim > 3) throw std::invalid_argument("diffeomorphism dimension must be 1, 2 or 3");
}

void check_point(const Vec& t, int dim) {
  if (t.size() != dim) throw std::invalid_argument("point dimension does not match the map");
}

}  // namespace

Diffeomorphism Diffeomorphism::identity(int dim) {
  check_dim(dim);
  Diffeomorphism f(Kind::identity, dim);
  f.matrix_ = Mat::Identity(dim, dim);
  f.inverse_matrix_ = f.matrix_;
  return f;
}

Diffeomorphism Diffeomorphism::linear(const Mat& matrix) {
  if (matrix.rows() != matrix.cols()) throw std::invalid_argument("linear map must be square");
  check_dim(static_cast<int>(matrix.rows()));
  const double det = matrix.determinant();
  const double scale = std::pow(matrix.cwiseAbs().maxCoeff(), static_cast<double>(matrix.rows()));
  if (!(std::abs(det) > 1e-12 * std::max(scale, 1e-300)))
    throw std::invalid_argument("linear map is singular (det = " + std::to_string(det) + ")");
  Diffeomorphism f(Kind::linear, static_cast<int>(matrix.rows()));
  f.matrix_ = matrix;
  f.inverse_matrix_ = matrix.inverse();
  return f;
}

Diffeomorphism Diffeomorphism::sine_warp(int dim, std::vector<SineTerm> terms) {
  check_dim(dim);
  double bound = 0.0;
  for (const auto& term : terms) {
    if (term.frequency.size() != dim || term.direction.size() != dim)
      throw std::invalid_argument("sine-warp term dimension mismatch");
    if (term.direction.cwiseAbs().maxCoeff() > 1.0)
      throw std::invalid_argument("sine-warp direction must have max-norm at most 1");
    bound += std::abs(term.amplitude) * term.frequency.norm() * dim;
  }
  if (!(bound < 1.0))
    throw std::invalid_argument("sine-warp contraction bound violated: sum eps |w| N = " +
                                std::to_string(bound));
  Diffeomorphism f(Kind::sine_warp, dim);
  f.terms_ = std::move(terms);
  return f;
}

Diffeomorphism Diffeomorphism::compose(const Diffeomorphism& first, const Diffeomorphism& second) {
  if (first.dim() != second.dim()) throw std::invalid_argument("composition dimension mismatch");
  Diffeomorphism f(Kind::composition, first.dim());
  f.parts_.push_back(std::make_shared<const Diffeomorphism>(first));
  f.parts_.push_back(std::make_shared<const Diffeomorphism>(second));
  if (first.is_linear() && second.is_linear()) {
    f.linear_composite_ = true;
    f.matrix_ = second.matrix() * first.matrix();
    f.inverse_matrix_ = first.inverse_matrix_ * second.inverse_matrix_;
  }
  return f;
}

const Mat& Diffeomorphism::matrix() const {
  if (!is_linear()) throw std::logic_error("matrix() requested from a nonlinear map");
  return matrix_;
}

MapJet Diffeomorphism::jet(const Vec& t) const {
  check_point(t, dim_);
  MapJet out;
  switch (kind_) {
    case Kind::identity:
    case Kind::linear:
      out.value = matrix_ * t;
      out.jacobian = matrix_;
      out.hessians.assign(dim_, Mat::Zero(dim_, dim_));
      return out;
    case Kind::sine_warp:
      out.value = t;
      out.jacobian = Mat::Identity(dim_, dim_);
      out.hessians.assign(dim_, Mat::Zero(dim_, dim_));
      for (const auto& term : terms_) {
        const double arg = term.frequency.dot(t) + term.phase;
        const double s = std::sin(arg);
        const double c = std::cos(arg);
        out.value += term.amplitude * s * term.direction;
        out.jacobian += term.amplitude * c * term.direction * term.frequency.transpose();
        const Mat ww = term.frequency * term.frequency.transpose();
        for (int k = 0; k < dim_; ++k) out.hessians[k] -= term.amplitude * s * term.direction[k] * ww;
      }
      return out;
    case Kind::composition: {
      // (g o h)'' _k = Bh^T Hess g_k Bh + sum_j (dg_k / dx_j) Hess h_j
      const MapJet inner = parts_[0]->jet(t);
      const MapJet outer = parts_[1]->jet(inner.value);
      out.value = outer.value;
      out.jacobian = outer.jacobian * inner.jacobian;
      out.hessians.assign(dim_, Mat::Zero(dim_, dim_));
      for (int k = 0; k < dim_; ++k) {
        Mat h = inner.jacobian.transpose() * outer.hessians[k] * inner.jacobian;
        for (int j = 0; j < dim_; ++j) h += outer.jacobian(k, j) * inner.hessians[j];
        out.hessians[k] = 0.5 * (h + h.transpose());
      }
      return out;
    }
  }
  throw std::logic_error("unreachable diffeomorphism kind");
}

Vec Diffeomorphism::forward(const Vec& t) const {
  check_point(t, dim_);
  if (kind_ == Kind::identity || kind_ == Kind::linear) return matrix_ * t;
  if (kind_ == Kind::composition) return parts_[1]->forward(parts_[0]->forward(t));
  Vec out = t;
  for (const auto& term : terms_)
    out += term.amplitude * std::sin(term.frequency.dot(t) + term.phase) * term.direction;
  return out;
}

Mat Diffeomorphism::jacobian(const Vec& t) const { return jet(t).jacobian; }
std::vector<Mat> Diffeomorphism::coordinate_hessians(const Vec& t) const { return jet(t).hessians; }

double Diffeomorphism::abs_det_jacobian(const Vec& t) const {
  const double det = std::abs(jacobian(t).determinant());
  if (!(det > 1e-12)) throw std::runtime_error("Jacobian is numerically singular");
  return det;
}

Vec Diffeomorphism::inverse(const Vec& image) const {
  check_point(image, dim_);
  if (kind_ == Kind::identity || kind_ == Kind::linear) return inverse_matrix_ * image;
  if (kind_ == Kind::composition) return parts_[0]->inverse(parts_[1]->inverse(image));

  Vec t = image;
  Vec residual = forward(t) - image;
  const double scale = 1.0 + image.norm();
  for (int iter = 0; iter < 100 && residual.norm() > 1e-14 * scale; ++iter) {
    const Vec step = jacobian(t).partialPivLu().solve(-residual);
    double alpha = 1.0;
    for (int halving = 0; halving < 40; ++halving, alpha *= 0.5) {
      const Vec trial = t + alpha * step;
      const Vec r = forward(trial) - image;
      if (r.norm() < residual.norm()) {
        t = trial;
        residual = r;
        break;
      }
    }
    if (alpha < 1e-12) break;
  }
  if (residual.norm() > 1e-11 * scale) throw std::runtime_error("sine-warp inversion did not converge");
  return t;
}

double Diffeomorphism::operator_norm_bound() const {
  switch (kind_) {
    case Kind::identity:
      return 1.0;
    case Kind::linear:
      return Eigen::JacobiSVD<Mat>(matrix_).singularValues()[0];
    case Kind::sine_warp: {
      double bound = 1.0;
      for (const auto& term : terms_)
        bound += std::abs(term.amplitude) * term.frequency.norm() * term.direction.norm();
      return bound;
    }
    case Kind::composition:
      return parts_[0]->operator_norm_bound() * parts_[1]->operator_norm_bound();
  }
  return 1.0;
}

double Diffeomorphism::column_norm_bound(int axis) const {
  switch (kind_) {
    case Kind::identity:
      return 1.0;
    case Kind::linear:
      return matrix_.col(axis).norm();
    case Kind::sine_warp: {
      double bound = 1.0;
      for (const auto& term : terms_)
        bound += std::abs(term.amplitude) * std::abs(term.frequency[axis]) * term.direction.norm();
      return bound;
    }
    case Kind::composition:
      if (linear_composite_) return matrix_.col(axis).norm();
      return parts_[1]->operator_norm_bound() * parts_[0]->column_norm_bound(axis);
  }
  return 1.0;
}

}  // namespace gfcrit
