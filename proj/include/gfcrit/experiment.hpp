#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gfcrit/covariance.hpp"
#include "gfcrit/critical_points.hpp"
#include "gfcrit/diffeomorphism.hpp"
#include "gfcrit/manifold.hpp"

namespace gfcrit {

inline constexpr const char* kVersion = "0.1.0";

enum class ExperimentKind { verify_diffeo, verify_aniso, height_dist, oracle_compare, manifold, simulate };
enum class RandomnessMode { shared, independent };

std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(const std::string& name);
std::string to_string(RandomnessMode mode);
RandomnessMode parse_randomness_mode(const std::string& name);

/// Map description as read from a config. A composition applies the sine
/// warp first and the linear matrix second.
struct MapSpec {
  std::string type = "identity";  // identity | linear | sine-warp | composition
  std::vector<double> matrix;     // row-major
  std::vector<SineTerm> terms;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::simulate;
  long replicates = 1;
  std::uint64_t seed = 0;
  RandomnessMode mode = RandomnessMode::independent;
  int threads = 1;
  std::string output = "out";
  bool write_catalogs = true;

  CovarianceKind covariance = CovarianceKind::squared_exponential;
  double length_scale = 1.0;
  int dim = 2;
  int waves = 2048;

  std::string domain = "box";  // box | torus
  std::vector<double> lower;
  std::vector<double> upper;
  double period = 0.0;
  double margin = -1.0;  // negative: 2% of the shortest side

  MapSpec map;
  std::vector<double> thresholds{-std::numeric_limits<double>::infinity()};
  SearchConfig search;
  double tol_loc = 1e-6;

  long oracle_samples = 1000000;
  long height_samples = 100000;
  bool equalize_counts = true;
  int min_class_points = 100;

  std::vector<double> semi_axes{1.0, 1.0, 1.0};
  std::vector<double> rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};
  int cells_per_face = 40;
};

ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);
/// INI text; parse_config(write_config(c)) reproduces c exactly.
std::string write_config(const ExperimentConfig& config);
/// Throws ConfigError on any inconsistency.
void validate_config(const ExperimentConfig& config);
/// Hex SHA-256 of the config text with threads and output removed.
std::string config_hash(const ExperimentConfig& config);

CovarianceModel make_model(const ExperimentConfig& config);
Domain make_domain(const ExperimentConfig& config);
Diffeomorphism make_map(const ExperimentConfig& config);
/// Axis-aligned box containing f(domain), margin 0.
Domain image_box(const ExperimentConfig& config, const Domain& domain);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};
/// Asymptotic two-sample Kolmogorov-Smirnov test.
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);
/// Kolmogorov survival function Q(x) = 2 sum (-1)^(k-1) exp(-2 k^2 x^2).
double kolmogorov_q(double x);

struct Check {
  std::string name;
  bool pass = false;
  nlohmann::ordered_json detail;
};

struct ExperimentReport {
  ExperimentConfig config;
  bool pass = false;
  long accepted = 0;
  std::vector<std::pair<long, std::string>> rejected;
  std::vector<Check> checks;
  nlohmann::ordered_json aggregates;
  std::string counts_csv;
  std::string heights_csv;
  std::map<std::string, std::string> catalogs;  // file name -> contents

  nlohmann::ordered_json to_json() const;
  const Check* find_check(const std::string& name) const;
};

ExperimentReport run_verify_diffeo(const ExperimentConfig& config);
ExperimentReport run_verify_aniso(const ExperimentConfig& config);
ExperimentReport run_height_dist(const ExperimentConfig& config);
ExperimentReport run_oracle_compare(const ExperimentConfig& config);
ExperimentReport run_manifold(const ExperimentConfig& config);
ExperimentReport run_simulate(const ExperimentConfig& config);
/// Validates, then dispatches on config.kind.
ExperimentReport run_experiment(const ExperimentConfig& config);

/// report.json, counts.csv, heights.csv and catalog files under dir.
void write_report(const ExperimentReport& report, const std::filesystem::path& dir);

}  // namespace gfcrit
