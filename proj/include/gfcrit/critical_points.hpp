#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "gfcrit/diffeomorphism.hpp"
#include "gfcrit/field.hpp"

namespace gfcrit {

/// Axis-aligned box (searched away from a boundary margin) or flat torus.
class Domain {
 public:
  enum class Kind { box, torus };

  /// margin < 0 selects the default, 2% of the shortest side.
  static Domain box(Vec lower, Vec upper, double margin = -1.0);
  static Domain torus(int dim, double period);

  Kind kind() const { return kind_; }
  int dim() const { return static_cast<int>(lower_.size()); }
  const Vec& lower() const { return lower_; }
  const Vec& upper() const { return upper_; }
  double period() const { return period_; }
  double margin() const { return margin_; }

  double side(int axis) const { return upper_[axis] - lower_[axis]; }
  /// Volume of the whole box or torus.
  double volume() const;
  /// Volume of the region in which critical points are reported.
  double interior_volume() const;
  /// Box: strictly inside the margin-shrunk box. Torus: always.
  bool contains(const Vec& t) const;
  Vec wrap(const Vec& t) const;
  /// Euclidean distance, or the flat-torus distance in torus mode.
  double distance(const Vec& a, const Vec& b) const;

 private:
  Kind kind_ = Kind::box;
  Vec lower_;
  Vec upper_;
  double period_ = 0.0;
  double margin_ = 0.0;
};

struct SearchConfig {
  /// Grid nodes per shortest expected wavelength 2 pi / (axis frequency).
  double seeds_per_wavelength = 12.0;
  int min_cells = 4;
  int max_newton_iterations = 60;
  /// Resolution doublings allowed while looking for stable counts.
  int max_doublings = 3;
  /// Zero selects the defaults 1e-10 * gradient scale, 1e-8 * Hessian scale
  /// and 1e-4 / (axis frequency / 3).
  double tol_grad = 0.0;
  double tol_eig = 0.0;
  double dedup_radius = 0.0;
  /// Nonzero: process seeds in a shuffled order (for invariance tests).
  std::uint64_t shuffle_seed = 0;
};

struct CriticalPoint {
  Vec location;
  double height = 0.0;
  int index = 0;
  Vec eigenvalues;  // ascending
  double gradient_residual = 0.0;
  int newton_iterations = 0;
};

struct SearchDiagnostics {
  std::vector<int> cells_per_axis;           // at the final level
  std::vector<std::vector<int>> level_counts;  // per level, count per index
  long seeds = 0;
  long singular_discards = 0;
  long nonconverged = 0;
  double tol_grad = 0.0;
  double tol_eig = 0.0;
  double dedup_radius = 0.0;
};

struct CriticalCatalog {
  std::vector<CriticalPoint> points;  // lexicographic by location
  Domain domain;
  SearchConfig config;
  SearchDiagnostics diagnostics;
  /// Per-index counts unchanged under one doubling of the seed grid.
  bool refinement_stable = false;

  int dim() const { return domain.dim(); }
  std::vector<int> counts_by_index() const;
};

/// Index (number of eigenvalues below -tol_eig) and ascending eigenvalues.
/// Throws NonMorseError if some |eigenvalue| <= tol_eig.
struct Classification {
  int index = 0;
  Vec eigenvalues;
};
Classification classify_hessian(const Mat& hessian, double tol_eig);
int classify(const Mat& hessian, double tol_eig);

/// Grid-seeded damped Newton on grad X, deduplicated and classified.
CriticalCatalog find_critical_points(const ScalarField& field, const Domain& domain,
                                     const SearchConfig& config = {});

/// #{p : height(p) >= u, index(p) = i}; u may be -infinity.
int count_mu(const CriticalCatalog& catalog, double u, int index);

/// sum_i (-1)^i mu_i(M, -inf).
int morse_sum(const CriticalCatalog& catalog);

/// Keeps the points satisfying `keep` (used to restrict a search box to f(M)).
CriticalCatalog filter_catalog(const CriticalCatalog& catalog,
                               const std::function<bool(const CriticalPoint&)>& keep);

struct MatchReport {
  struct Pair {
    std::size_t x = 0;
    std::size_t z = 0;
    double distance = 0.0;
    double height_difference = 0.0;
  };
  bool pass = false;
  std::vector<Pair> pairs;
  std::vector<std::size_t> unmatched_x;
  std::vector<std::size_t> unmatched_z;
  std::vector<std::size_t> index_mismatches;   // indices into pairs
  std::vector<std::size_t> height_mismatches;  // indices into pairs
  double max_distance = 0.0;
  double max_height_difference = 0.0;

  std::string summary() const;
};

/// Greedy nearest-neighbour matching of mapped X locations against Z
/// locations. PASS iff the matching is a perfect bijection with all
/// distances < tol_loc, equal indices and |height difference| < tol_height.
MatchReport match_points(const std::vector<Vec>& mapped_x, const std::vector<int>& index_x,
                         const std::vector<double>& height_x, const std::vector<Vec>& loc_z,
                         const std::vector<int>& index_z, const std::vector<double>& height_z,
                         double tol_loc, double tol_height,
                         const std::function<double(const Vec&, const Vec&)>& metric);

MatchReport match_catalogs(const CriticalCatalog& catalog_x, const CriticalCatalog& catalog_z,
                           const Diffeomorphism& map, double tol_loc, double tol_height = 1e-9);

/// Columns: replicate_id, x1..xN, height, index, eig1..eigN, residual, iterations.
void write_catalog_csv_header(std::ostream& out, int dim);
void write_catalog_csv_rows(std::ostream& out, const CriticalCatalog& catalog, long replicate_id);

}  // namespace gfcrit
