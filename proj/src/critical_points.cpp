#include "gfcrit/critical_points.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

namespace gfcrit {

Domain Domain::box(Vec lower, Vec upper, double margin) {
  if (lower.size() != upper.size() || lower.size() < 1 || lower.size() > 3)
    throw std::invalid_argument("box corners must have matching dimension 1..3");
  for (Eigen::Index d = 0; d < lower.size(); ++d)
    if (!(upper[d] > lower[d])) throw std::invalid_argument("box upper corner must exceed lower corner");
  Domain dom;
  dom.kind_ = Kind::box;
  const double shortest = (upper - lower).minCoeff();
  dom.lower_ = std::move(lower);
  dom.upper_ = std::move(upper);
  dom.margin_ = margin < 0.0 ? 0.02 * shortest : margin;
  if (2.0 * dom.margin_ >= shortest) throw std::invalid_argument("box margin leaves an empty interior");
  return dom;
}

Domain Domain::torus(int dim, double period) {
  if (dim < 1 || dim > 3) throw std::invalid_argument("torus dimension must be 1..3");
  if (!(period > 0.0)) throw std::invalid_argument("torus period must be positive");
  Domain dom;
  dom.kind_ = Kind::torus;
  dom.lower_ = Vec::Zero(dim);
  dom.upper_ = Vec::Constant(dim, period);
  dom.period_ = period;
  return dom;
}

double Domain::volume() const { return (upper_ - lower_).prod(); }

double Domain::interior_volume() const {
  if (kind_ == Kind::torus) return volume();
  return (upper_ - lower_ - Vec::Constant(dim(), 2.0 * margin_)).prod();
}

bool Domain::contains(const Vec& t) const {
  if (kind_ == Kind::torus) return true;
  for (int d = 0; d < dim(); ++d)
    if (!(t[d] > lower_[d] + margin_ && t[d] < upper_[d] - margin_)) return false;
  return true;
}

Vec Domain::wrap(const Vec& t) const {
  if (kind_ == Kind::box) return t;
  Vec out = t;
  for (int d = 0; d < dim(); ++d) {
    out[d] = std::fmod(t[d], period_);
    if (out[d] < 0.0) out[d] += period_;
    if (out[d] >= period_) out[d] = 0.0;
  }
  return out;
}

double Domain::distance(const Vec& a, const Vec& b) const {
  if (kind_ == Kind::box) return (a - b).norm();
  double sum = 0.0;
  for (int d = 0; d < dim(); ++d) {
    double diff = std::fmod(std::abs(a[d] - b[d]), period_);
    diff = std::min(diff, period_ - diff);
    sum += diff * diff;
  }
  return std::sqrt(sum);
}

std::vector<int> CriticalCatalog::counts_by_index() const {
  std::vector<int> counts(dim() + 1, 0);
  for (const auto& p : points) ++counts[p.index];
  return counts;
}

Classification classify_hessian(const Mat& hessian, double tol_eig) {
  if (hessian.rows() != hessian.cols()) throw std::invalid_argument("classify: Hessian must be square");
  Eigen::SelfAdjointEigenSolver<Mat> solver(hessian, Eigen::EigenvaluesOnly);
  Classification out;
  out.eigenvalues = solver.eigenvalues();
  for (Eigen::Index k = 0; k < out.eigenvalues.size(); ++k) {
    const double e = out.eigenvalues[k];
    if (std::abs(e) <= tol_eig) {
      std::ostringstream msg;
      msg << "non-Morse Hessian: eigenvalue " << e << " within tolerance " << tol_eig;
      throw NonMorseError(msg.str());
    }
    if (e < -tol_eig) ++out.index;
  }
  return out;
}

int classify(const Mat& hessian, double tol_eig) { return classify_hessian(hessian, tol_eig).index; }

namespace {

bool lex_less(const Vec& a, const Vec& b) {
  for (Eigen::Index d = 0; d < a.size(); ++d) {
    if (a[d] < b[d]) return true;
    if (a[d] > b[d]) return false;
  }
  return false;
}

/// Lexicographic sort, then greedy clustering within `radius`.
std::vector<CriticalPoint> deduplicate(std::vector<CriticalPoint> points, const Domain& domain,
                                       double radius) {
  std::sort(points.begin(), points.end(), [](const CriticalPoint& p, const CriticalPoint& q) {
    if (lex_less(p.location, q.location)) return true;
    if (lex_less(q.location, p.location)) return false;
    return p.gradient_residual < q.gradient_residual;
  });
  std::vector<CriticalPoint> kept;
  for (auto& p : points) {
    const bool duplicate = std::any_of(kept.begin(), kept.end(), [&](const CriticalPoint& q) {
      return domain.distance(p.location, q.location) <= radius;
    });
    if (!duplicate) kept.push_back(std::move(p));
  }
  return kept;
}

std::vector<int> index_counts(const std::vector<CriticalPoint>& points, int dim) {
  std::vector<int> counts(dim + 1, 0);
  for (const auto& p : points) ++counts[p.index];
  return counts;
}

struct NewtonResult {
  enum class Status { converged, singular, stalled } status = Status::stalled;
  Vec location;
  FieldJet jet;
  int iterations = 0;
};

/// Damped Newton on grad X from `seed`; iterates leaving the ball of radius
/// `max_travel` around the seed are abandoned (another seed owns that point).
NewtonResult newton(const ScalarField& field, const Vec& seed, const Domain& domain, double tol_grad,
                    double max_step, double max_travel, int max_iterations) {
  NewtonResult out;
  Vec t = seed;
  FieldJet jet = field.jet(t);
  double gnorm = jet.gradient.norm();
  for (int iter = 0; iter <= max_iterations; ++iter) {
    out.iterations = iter;
    if (gnorm < tol_grad) {
      out.status = NewtonResult::Status::converged;
      break;
    }
    if (iter == max_iterations) break;
    const Eigen::FullPivLU<Mat> lu(jet.hessian);
    if (!lu.isInvertible() || lu.rcond() < 1e-14) {
      out.status = NewtonResult::Status::singular;
      return out;
    }
    Vec step = lu.solve(-jet.gradient);
    const double len = step.norm();
    if (len > max_step) step *= max_step / len;
    bool accepted = false;
    double alpha = 1.0;
    for (int halving = 0; halving < 40; ++halving, alpha *= 0.5) {
      Vec trial = domain.wrap(t + alpha * step);
      FieldJet trial_jet = field.jet(trial);
      const double trial_norm = trial_jet.gradient.norm();
      if (domain.distance(trial, seed) > max_travel) break;
      if (trial_norm < gnorm) {
        t = std::move(trial);
        jet = std::move(trial_jet);
        gnorm = trial_norm;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  out.location = std::move(t);
  out.jet = std::move(jet);
  return out;
}

struct LevelGrid {
  GridAxes axes;
  std::vector<int> cells;
  std::vector<double> spacing;
};

LevelGrid make_grid(const Domain& domain, const std::vector<int>& cells) {
  LevelGrid grid;
  grid.cells = cells;
  const int n = domain.dim();
  grid.axes.coords.resize(n);
  grid.spacing.resize(n);
  for (int d = 0; d < n; ++d) {
    const double h = domain.side(d) / cells[d];
    grid.spacing[d] = h;
    const int nodes = domain.kind() == Domain::Kind::torus ? cells[d] : cells[d] + 1;
    auto& c = grid.axes.coords[d];
    c.resize(nodes);
    for (int i = 0; i < nodes; ++i) c[i] = domain.lower()[d] + i * h;
  }
  return grid;
}

/// Cells whose one-ring node neighbourhood shows both signs (or a zero) in
/// every gradient component; seeds are their centres.
std::vector<Vec> candidate_seeds(const Domain& domain, const LevelGrid& grid,
                                 const std::vector<double>& gradients) {
  const int n = domain.dim();
  const bool torus = domain.kind() == Domain::Kind::torus;
  std::vector<int> nodes(n);
  for (int d = 0; d < n; ++d) nodes[d] = static_cast<int>(grid.axes.coords[d].size());
  long total_cells = 1;
  for (int d = 0; d < n; ++d) total_cells *= grid.cells[d];

  int offsets = 1;
  for (int d = 0; d < n; ++d) offsets *= 4;

  std::vector<Vec> seeds;
  std::vector<int> cell(n), node(n);
  for (long flat = 0; flat < total_cells; ++flat) {
    long rem = flat;
    for (int d = n - 1; d >= 0; --d) {
      cell[d] = static_cast<int>(rem % grid.cells[d]);
      rem /= grid.cells[d];
    }
    std::array<bool, 3> has_neg{}, has_pos{};
    for (int o = 0; o < offsets; ++o) {
      int code = o;
      bool valid = true;
      for (int d = n - 1; d >= 0; --d) {
        int idx = cell[d] - 1 + code % 4;
        code /= 4;
        if (torus) {
          idx = (idx % nodes[d] + nodes[d]) % nodes[d];
        } else if (idx < 0 || idx >= nodes[d]) {
          valid = false;
        }
        node[d] = idx;
      }
      if (!valid) continue;
      std::size_t node_flat = 0;
      for (int d = 0; d < n; ++d) node_flat = node_flat * nodes[d] + node[d];
      for (int k = 0; k < n; ++k) {
        const double g = gradients[node_flat * n + k];
        if (g <= 0.0) has_neg[k] = true;
        if (g >= 0.0) has_pos[k] = true;
      }
    }
    bool candidate = true;
    for (int k = 0; k < n; ++k) candidate = candidate && has_neg[k] && has_pos[k];
    if (!candidate) continue;
    Vec seed(n);
    for (int d = 0; d < n; ++d) seed[d] = domain.lower()[d] + (cell[d] + 0.5) * grid.spacing[d];
    seeds.push_back(std::move(seed));
  }
  return seeds;
}

}  // namespace

CriticalCatalog find_critical_points(const ScalarField& field, const Domain& domain,
                                     const SearchConfig& config) {
  const int n = field.dim();
  if (domain.dim() != n) throw std::invalid_argument("domain dimension does not match the field");
  if (!(config.seeds_per_wavelength > 0.0) || config.min_cells < 1 || config.max_doublings < 1)
    throw std::invalid_argument("invalid search configuration");

  double max_freq = 0.0;
  std::vector<int> base_cells(n);
  for (int d = 0; d < n; ++d) {
    const double freq = field.axis_frequency(d);
    max_freq = std::max(max_freq, freq);
    const double wavelength = 2.0 * std::numbers::pi / freq;
    base_cells[d] = std::max(config.min_cells,
                             static_cast<int>(std::ceil(domain.side(d) * config.seeds_per_wavelength /
                                                        wavelength)));
  }

  CriticalCatalog catalog{{}, domain, config, {}, false};
  auto& diag = catalog.diagnostics;
  diag.tol_grad = config.tol_grad > 0.0 ? config.tol_grad : 1e-10 * field.gradient_scale();
  diag.tol_eig = config.tol_eig > 0.0 ? config.tol_eig : 1e-8 * field.hessian_scale();
  diag.dedup_radius = config.dedup_radius > 0.0 ? config.dedup_radius : 1e-4 * 3.0 / max_freq;

  std::vector<CriticalPoint> merged;
  std::vector<int> previous;
  for (int level = 0; level <= config.max_doublings; ++level) {
    std::vector<int> cells = base_cells;
    for (auto& c : cells) c <<= level;
    const LevelGrid grid = make_grid(domain, cells);
    std::vector<Vec> seeds = candidate_seeds(domain, grid, field.gradient_grid(grid.axes));
    if (config.shuffle_seed != 0) {
      Rng rng(config.shuffle_seed + static_cast<std::uint64_t>(level));
      std::shuffle(seeds.begin(), seeds.end(), rng);
    }
    diag.cells_per_axis = cells;
    diag.seeds += static_cast<long>(seeds.size());

    double diagonal = 0.0;
    for (double h : grid.spacing) diagonal += h * h;
    const double max_travel = 3.0 * std::sqrt(diagonal);
    const double max_step = std::min(std::numbers::pi / max_freq, max_travel);

    std::vector<CriticalPoint> found;
    for (const auto& seed : seeds) {
      NewtonResult r = newton(field, seed, domain, diag.tol_grad, max_step, max_travel,
                              config.max_newton_iterations);
      if (r.status == NewtonResult::Status::singular) {
        ++diag.singular_discards;
        continue;
      }
      if (r.status != NewtonResult::Status::converged) {
        ++diag.nonconverged;
        continue;
      }
      if (!domain.contains(r.location)) continue;
      CriticalPoint p;
      Classification cls;
      try {
        cls = classify_hessian(r.jet.hessian, diag.tol_eig);
      } catch (const NonMorseError& e) {
        std::ostringstream msg;
        msg << e.what() << " at t = (" << r.location.transpose() << ")";
        throw NonMorseError(msg.str());
      }
      p.location = r.location;
      p.height = r.jet.value;
      p.index = cls.index;
      p.eigenvalues = cls.eigenvalues;
      p.gradient_residual = r.jet.gradient.norm();
      p.newton_iterations = r.iterations;
      found.push_back(std::move(p));
    }
    found = deduplicate(std::move(found), domain, diag.dedup_radius);
    const std::vector<int> counts = index_counts(found, n);
    diag.level_counts.push_back(counts);

    merged.insert(merged.end(), found.begin(), found.end());
    merged = deduplicate(std::move(merged), domain, diag.dedup_radius);
    if (level > 0 && counts == previous && index_counts(merged, n) == counts) {
      catalog.refinement_stable = true;
      break;
    }
    previous = counts;
  }
  catalog.points = std::move(merged);
  return catalog;
}

int count_mu(const CriticalCatalog& catalog, double u, int index) {
  return static_cast<int>(std::count_if(catalog.points.begin(), catalog.points.end(),
                                        [&](const CriticalPoint& p) { return p.height >= u && p.index == index; }));
}

int morse_sum(const CriticalCatalog& catalog) {
  int sum = 0;
  for (const auto& p : catalog.points) sum += (p.index % 2 == 0) ? 1 : -1;
  return sum;
}

CriticalCatalog filter_catalog(const CriticalCatalog& catalog,
                               const std::function<bool(const CriticalPoint&)>& keep) {
  CriticalCatalog out = catalog;
  out.points.clear();
  for (const auto& p : catalog.points)
    if (keep(p)) out.points.push_back(p);
  return out;
}

MatchReport match_points(const std::vector<Vec>& mapped_x, const std::vector<int>& index_x,
                         const std::vector<double>& height_x, const std::vector<Vec>& loc_z,
                         const std::vector<int>& index_z, const std::vector<double>& height_z,
                         double tol_loc, double tol_height,
                         const std::function<double(const Vec&, const Vec&)>& metric) {
  MatchReport report;
  std::vector<bool> used(loc_z.size(), false);
  for (std::size_t i = 0; i < mapped_x.size(); ++i) {
    if (mapped_x[i].size() != (loc_z.empty() ? mapped_x[i].size() : loc_z.front().size()))
      throw std::invalid_argument("match: dimension mismatch");
    std::size_t best = loc_z.size();
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < loc_z.size(); ++j) {
      if (used[j]) continue;
      const double dist = metric(mapped_x[i], loc_z[j]);
      if (dist < best_dist) {
        best_dist = dist;
        best = j;
      }
    }
    if (best == loc_z.size() || !(best_dist < tol_loc)) {
      report.unmatched_x.push_back(i);
      continue;
    }
    used[best] = true;
    MatchReport::Pair pair{i, best, best_dist, std::abs(height_x[i] - height_z[best])};
    report.max_distance = std::max(report.max_distance, pair.distance);
    report.max_height_difference = std::max(report.max_height_difference, pair.height_difference);
    if (index_x[i] != index_z[best]) report.index_mismatches.push_back(report.pairs.size());
    if (!(pair.height_difference < tol_height)) report.height_mismatches.push_back(report.pairs.size());
    report.pairs.push_back(pair);
  }
  for (std::size_t j = 0; j < loc_z.size(); ++j)
    if (!used[j]) report.unmatched_z.push_back(j);
  report.pass = report.unmatched_x.empty() && report.unmatched_z.empty() &&
                report.index_mismatches.empty() && report.height_mismatches.empty();
  return report;
}

MatchReport match_catalogs(const CriticalCatalog& catalog_x, const CriticalCatalog& catalog_z,
                           const Diffeomorphism& map, double tol_loc, double tol_height) {
  if (catalog_x.dim() != catalog_z.dim() || map.dim() != catalog_x.dim())
    throw std::invalid_argument("match_catalogs: dimension mismatch");
  std::vector<Vec> mapped, loc_z;
  std::vector<int> ix, iz;
  std::vector<double> hx, hz;
  for (const auto& p : catalog_x.points) {
    mapped.push_back(catalog_z.domain.wrap(map.forward(p.location)));
    ix.push_back(p.index);
    hx.push_back(p.height);
  }
  for (const auto& p : catalog_z.points) {
    loc_z.push_back(p.location);
    iz.push_back(p.index);
    hz.push_back(p.height);
  }
  const Domain& dom = catalog_z.domain;
  return match_points(mapped, ix, hx, loc_z, iz, hz, tol_loc, tol_height,
                      [&dom](const Vec& a, const Vec& b) { return dom.distance(a, b); });
}

std::string MatchReport::summary() const {
  std::ostringstream out;
  out << (pass ? "PASS" : "FAIL") << ": " << pairs.size() << " pairs, " << unmatched_x.size()
      << " unmatched X, " << unmatched_z.size() << " unmatched Z, " << index_mismatches.size()
      << " index mismatches, " << height_mismatches.size() << " height mismatches, max distance "
      << max_distance << ", max height difference " << max_height_difference;
  return out.str();
}

void write_catalog_csv_header(std::ostream& out, int dim) {
  out << "replicate_id";
  for (int d = 1; d <= dim; ++d) out << ",x" << d;
  out << ",height,index";
  for (int d = 1; d <= dim; ++d) out << ",eig" << d;
  out << ",residual,iterations\n";
}

void write_catalog_csv_rows(std::ostream& out, const CriticalCatalog& catalog, long replicate_id) {
  for (const auto& p : catalog.points) {
    out << replicate_id;
    for (Eigen::Index d = 0; d < p.location.size(); ++d) out << ',' << format_double(p.location[d]);
    out << ',' << format_double(p.height) << ',' << p.index;
    for (Eigen::Index d = 0; d < p.eigenvalues.size(); ++d) out << ',' << format_double(p.eigenvalues[d]);
    out << ',' << format_double(p.gradient_residual) << ',' << p.newton_iterations << '\n';
  }
}

}  // namespace gfcrit
