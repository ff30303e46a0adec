#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include "gfcrit/experiment.hpp"
#include "gfcrit/kac_rice.hpp"
#include "gfcrit/spectral_field.hpp"
#include "gfcrit/transformed_field.hpp"

namespace gfcrit {

namespace {

using json = nlohmann::ordered_json;

// substream tags
constexpr std::uint64_t kArmPrimary = 1;
constexpr std::uint64_t kArmSecond = 2;
constexpr std::uint64_t kArmThird = 3;
constexpr std::uint64_t kOracleCounts = 4;
constexpr std::uint64_t kOracleHeights = 5;

std::uint64_t replicate_seed(const ExperimentConfig& c, std::uint64_t arm, long r) {
  return substream_seed(substream_seed(c.seed, arm), static_cast<std::uint64_t>(r));
}

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

// One catalog's contribution to the aggregate tables.
struct Harvest {
  std::vector<int> counts;  // [index * thresholds + k], height >= u
  std::vector<int> totals;  // per index
  std::vector<int> index;
  std::vector<double> height;
  std::vector<double> first_coord;
  std::string rows;
};

struct ReplicateResult {
  bool ok = true;
  std::string reason;
  std::vector<Harvest> arms;
  bool matched = true;
  std::string match_summary;
  double max_distance = 0.0;
  double max_height_difference = 0.0;
  std::vector<int> morse;
};

template <class Point, class Coord>
Harvest harvest_points(const std::vector<Point>& points, int dim, const std::vector<double>& u, Coord coord) {
  Harvest h;
  const std::size_t nu = u.size();
  h.counts.assign((dim + 1) * nu, 0);
  h.totals.assign(dim + 1, 0);
  for (const auto& p : points) {
    ++h.totals[p.index];
    for (std::size_t k = 0; k < nu; ++k) h.counts[p.index * nu + k] += p.height >= u[k];
    h.index.push_back(p.index);
    h.height.push_back(p.height);
    h.first_coord.push_back(coord(p));
  }
  return h;
}

Harvest harvest(const CriticalCatalog& cat, const ExperimentConfig& c, long r) {
  Harvest h = harvest_points(cat.points, cat.dim(), c.thresholds, [](const CriticalPoint& p) { return p.location[0]; });
  if (c.write_catalogs) {
    std::ostringstream out;
    write_catalog_csv_rows(out, cat, r);
    h.rows = out.str();
  }
  return h;
}

Harvest harvest(const SurfaceCatalog& cat, const ExperimentConfig& c, long r) {
  Harvest h = harvest_points(cat.points, 2, c.thresholds, [](const SurfaceCriticalPoint& p) { return p.ambient[0]; });
  if (c.write_catalogs) {
    std::ostringstream out;
    write_surface_csv_rows(out, cat, r);
    h.rows = out.str();
  }
  return h;
}

// Runs fn(r) for every replicate on a small thread pool; results are stored
// by replicate index so scheduling never affects the aggregation order.
template <class Fn>
std::vector<ReplicateResult> run_replicates(const ExperimentConfig& c, Fn fn) {
  std::vector<ReplicateResult> results(c.replicates);
  std::atomic<long> next{0};
  std::mutex lock;
  std::exception_ptr error;
  const auto worker = [&] {
    for (long r = next++; r < c.replicates; r = next++) {
      try {
        try {
          results[r] = fn(r);
        } catch (const NonMorseError& e) {
          results[r].ok = false;
          results[r].reason = e.what();
        }
      } catch (...) {
        const std::lock_guard<std::mutex> g(lock);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int n = static_cast<int>(std::min<long>(c.threads, c.replicates));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return results;
}

bool reject_unstable(ReplicateResult& res, bool stable, const std::string& what) {
  if (stable) return false;
  res.ok = false;
  res.reason = "refinement-unstable " + what + " catalog";
  return true;
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& v) {
  MeanSe m;
  if (v.empty()) return m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  if (v.size() < 2) return m;
  double ss = 0.0;
  for (double x : v) ss += (x - m.mean) * (x - m.mean);
  m.se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  return m;
}

bool agree(double a, double b, double se, double k = 3.0) {
  if (se > 0.0) return std::abs(a - b) <= k * se;
  return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

std::vector<const ReplicateResult*> accepted(const std::vector<ReplicateResult>& results) {
  std::vector<const ReplicateResult*> out;
  for (const auto& r : results)
    if (r.ok) out.push_back(&r);
  return out;
}

// Per (index, threshold) mean count over accepted replicates.
std::vector<MeanSe> count_table(const std::vector<const ReplicateResult*>& ok, std::size_t arm, std::size_t cells) {
  std::vector<MeanSe> table(cells);
  for (std::size_t j = 0; j < cells; ++j) {
    std::vector<double> v;
    for (const auto* r : ok) v.push_back(r->arms[arm].counts[j]);
    table[j] = mean_se(v);
  }
  return table;
}

MeanSe total_stat(const std::vector<const ReplicateResult*>& ok, std::size_t arm) {
  std::vector<double> v;
  for (const auto* r : ok) v.push_back(static_cast<double>(r->arms[arm].height.size()));
  return mean_se(v);
}

std::string artifact_comment(const ExperimentConfig& c) {
  return "# gfcrit " + to_string(c.kind) + " seed=" + std::to_string(c.seed) + " config=" + config_hash(c) + "\n";
}

ExperimentReport start_report(const ExperimentConfig& c) {
  ExperimentReport rep;
  rep.config = c;
  return rep;
}

// Fills replicate bookkeeping and the CSV artifacts.
void collect(ExperimentReport& rep, const std::vector<ReplicateResult>& results, const std::vector<std::string>& arms,
             const std::string& catalog_header) {
  const ExperimentConfig& c = rep.config;
  const std::string comment = artifact_comment(c);
  const std::size_t nu = c.thresholds.size();
  std::ostringstream counts, heights;
  counts << comment << "replicate_id,arm,index,u,count\n";
  heights << comment << "replicate_id,arm,index,height\n";
  std::vector<std::ostringstream> catalogs(arms.size());
  for (auto& s : catalogs) s << comment << catalog_header;
  for (long r = 0; r < static_cast<long>(results.size()); ++r) {
    const auto& res = results[r];
    if (!res.ok) {
      rep.rejected.emplace_back(r, res.reason);
      continue;
    }
    ++rep.accepted;
    for (std::size_t a = 0; a < arms.size(); ++a) {
      const Harvest& h = res.arms[a];
      for (std::size_t j = 0; j < h.counts.size(); ++j)
        counts << r << ',' << arms[a] << ',' << j / nu << ',' << format_double(c.thresholds[j % nu]) << ','
               << h.counts[j] << '\n';
      for (std::size_t p = 0; p < h.height.size(); ++p)
        heights << r << ',' << arms[a] << ',' << h.index[p] << ',' << format_double(h.height[p]) << '\n';
      catalogs[a] << h.rows;
    }
  }
  rep.counts_csv = counts.str();
  rep.heights_csv = heights.str();
  if (c.write_catalogs)
    for (std::size_t a = 0; a < arms.size(); ++a) rep.catalogs["catalog_" + arms[a] + ".csv"] = catalogs[a].str();

  const bool ok = rep.accepted > 0 && static_cast<double>(rep.rejected.size()) <= 0.1 * static_cast<double>(c.replicates);
  json d;
  d["accepted"] = rep.accepted;
  d["rejected"] = rep.rejected.size();
  d["limit_fraction"] = 0.1;
  rep.checks.push_back({"rejections", ok, d});

  json tables;
  const auto good = accepted(results);
  for (std::size_t a = 0; a < arms.size() && !good.empty(); ++a) {
    const std::size_t cells = good.front()->arms[a].counts.size();
    const auto table = count_table(good, a, cells);
    json rows = json::array();
    for (std::size_t j = 0; j < cells; ++j)
      rows.push_back({{"index", j / nu},
                      {"u", format_double(c.thresholds[j % nu])},
                      {"mean", table[j].mean},
                      {"std_error", table[j].se}});
    tables[arms[a]] = rows;
  }
  rep.aggregates["mean_counts"] = tables;
}

void finish(ExperimentReport& rep) {
  rep.pass = !rep.checks.empty();
  for (const auto& ch : rep.checks) rep.pass = rep.pass && ch.pass;
}

std::string catalog_header(int dim) {
  std::ostringstream out;
  write_catalog_csv_header(out, dim);
  return out.str();
}

std::string surface_header() {
  std::ostringstream out;
  write_surface_csv_header(out);
  return out.str();
}

std::shared_ptr<const SpectralField> sample_for(const ExperimentConfig& c, const CovarianceModel& model,
                                                std::uint64_t seed) {
  std::optional<double> period;
  if (c.domain == "torus") period = c.period;
  return std::make_shared<const SpectralField>(sample_field(model, c.waves, seed, period));
}

// Per-(index, u) comparison of two count tables; b is scaled by factor.
// For sparse rows (pooled count, mean times pooled_scale, below
// min_class_points) the sample standard error is unreliable, so it is floored
// by the Poisson standard error of the pooled count under the null. b is a
// second field arm when b_is_field, otherwise a Monte Carlo oracle.
Check compare_tables(const std::string& name, const ExperimentConfig& c, const std::vector<MeanSe>& a,
                     const std::vector<MeanSe>& b, double factor, double pooled_scale, bool b_is_field) {
  const std::size_t nu = c.thresholds.size();
  Check ch{name, true, json::object()};
  json rows = json::array();
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double target = factor * b[j].mean;
    double se = std::hypot(a[j].se, factor * b[j].se);
    const double m = std::max(a[j].mean, target);
    const bool sparse = m * pooled_scale < c.min_class_points;
    if (sparse) {
      double var = m / pooled_scale;
      var += b_is_field ? factor * m / pooled_scale : (factor * b[j].se) * (factor * b[j].se);
      se = std::max(se, std::sqrt(var));
    }
    const bool ok = agree(a[j].mean, target, se);
    ch.pass = ch.pass && ok;
    rows.push_back({{"index", j / nu},
                    {"u", format_double(c.thresholds[j % nu])},
                    {"observed", a[j].mean},
                    {"expected", target},
                    {"combined_std_error", se},
                    {"sparse", sparse},
                    {"pass", ok}});
  }
  ch.detail["rows"] = rows;
  return ch;
}

// Pooled heights of one index class, plus per-replicate counts for cluster errors.
struct Pool {
  std::vector<double> heights;
  std::vector<std::vector<double>> by_replicate;
};

Pool pool_heights(const std::vector<const ReplicateResult*>& ok, std::size_t arm, int index,
                  const std::function<bool(double)>& where = {}) {
  Pool p;
  for (const auto* r : ok) {
    const Harvest& h = r->arms[arm];
    std::vector<double> mine;
    for (std::size_t k = 0; k < h.height.size(); ++k)
      if (h.index[k] == index && (!where || where(h.first_coord[k]))) mine.push_back(h.height[k]);
    p.heights.insert(p.heights.end(), mine.begin(), mine.end());
    p.by_replicate.push_back(std::move(mine));
  }
  return p;
}

// Ratio estimate of P(height > u) with a replicate-cluster standard error.
MeanSe pooled_survival(const Pool& p, double u) {
  double num = 0.0, den = 0.0;
  std::vector<std::pair<double, double>> parts;
  for (const auto& rep : p.by_replicate) {
    const double n = static_cast<double>(rep.size());
    const double above = static_cast<double>(std::count_if(rep.begin(), rep.end(), [u](double h) { return h > u; }));
    parts.emplace_back(above, n);
    num += above;
    den += n;
  }
  MeanSe m;
  if (den == 0.0) return m;
  m.mean = num / den;
  const double r = static_cast<double>(parts.size());
  if (r < 2.0) return m;
  double ss = 0.0;
  for (const auto& [a, n] : parts) ss += (a - m.mean * n) * (a - m.mean * n);
  m.se = std::sqrt(r / (r - 1.0) * ss) / den;
  return m;
}

json ks_json(const KsResult& ks, std::size_t na, std::size_t nb) {
  return {{"statistic", ks.statistic}, {"p_value", ks.p_value}, {"n_a", na}, {"n_b", nb}};
}

}  // namespace

double kolmogorov_q(double x) {
  if (x <= 0.0) return 1.0;
  if (x < 1.18) {
    // P(x) = sqrt(2 pi) / x * sum exp(-(2k-1)^2 pi^2 / (8 x^2))
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double sum = 0.0;
    for (int k = 1; k <= 20; ++k) sum += std::exp(-(2.0 * k - 1.0) * (2.0 * k - 1.0) * pi2 / (8.0 * x * x));
    return 1.0 - std::sqrt(2.0 * std::numbers::pi) / x * sum;
  }
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    sum += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  return {d, kolmogorov_q((ne + 0.12 + 0.11 / ne) * d)};
}

json ExperimentReport::to_json() const {
  json j;
  j["tool"] = "gfcrit";
  j["version"] = kVersion;
  j["experiment"] = to_string(config.kind);
  j["seed"] = config.seed;
  j["config_hash"] = config_hash(config);
  j["replicates"] = config.replicates;
  j["mode"] = to_string(config.mode);
  j["verdict"] = pass ? "PASS" : "FAIL";
  j["accepted"] = accepted;
  json rej = json::array();
  for (const auto& [r, why] : rejected) rej.push_back({{"replicate", r}, {"reason", why}});
  j["rejected"] = rej;
  json checks_json = json::array();
  for (const auto& ch : checks) {
    json cj{{"name", ch.name}, {"pass", ch.pass}};
    for (const auto& [k, v] : ch.detail.items()) cj[k] = v;
    checks_json.push_back(cj);
  }
  j["checks"] = checks_json;
  j["aggregates"] = aggregates;
  return j;
}

const Check* ExperimentReport::find_check(const std::string& name) const {
  for (const auto& ch : checks)
    if (ch.name == name) return &ch;
  return nullptr;
}

ExperimentReport run_verify_diffeo(const ExperimentConfig& c) {
  const auto model = make_model(c);
  const Domain domain = make_domain(c);
  const Diffeomorphism f = make_map(c);
  const Domain image = image_box(c, domain);
  const bool independent = c.mode == RandomnessMode::independent;
  const auto inside = [&](const CriticalPoint& p) { return domain.contains(f.inverse(p.location)); };

  const auto results = run_replicates(c, [&](long r) {
    ReplicateResult res;
    const auto z = sample_for(c, model, replicate_seed(c, kArmPrimary, r));
    const TransformedField x(z, f);
    const auto cat_x = find_critical_points(x, domain, c.search);
    const auto cat_z_full = find_critical_points(*z, image, c.search);
    if (reject_unstable(res, cat_x.refinement_stable, "X") || reject_unstable(res, cat_z_full.refinement_stable, "Z"))
      return res;
    const auto cat_z = filter_catalog(cat_z_full, inside);
    const auto report = match_catalogs(cat_x, cat_z, f, c.tol_loc);
    res.matched = report.pass;
    res.match_summary = report.summary();
    res.max_distance = report.max_distance;
    res.max_height_difference = report.max_height_difference;
    res.arms.push_back(harvest(cat_x, c, r));
    res.arms.push_back(harvest(cat_z, c, r));
    if (independent) {
      const auto other = sample_for(c, model, replicate_seed(c, kArmThird, r));
      const auto cat_o = find_critical_points(*other, image, c.search);
      if (reject_unstable(res, cat_o.refinement_stable, "independent Z")) return res;
      res.arms.push_back(harvest(filter_catalog(cat_o, inside), c, r));
    }
    return res;
  });

  ExperimentReport rep = start_report(c);
  std::vector<std::string> arms{"x", "z"};
  if (independent) arms.push_back("z_independent");
  collect(rep, results, arms, catalog_header(c.dim));
  const auto ok = accepted(results);

  Check bij{"bijection", true, json::object()};
  json failures = json::array();
  double max_d = 0.0, max_h = 0.0;
  for (long r = 0; r < c.replicates; ++r) {
    const auto& res = results[r];
    if (!res.ok) continue;
    max_d = std::max(max_d, res.max_distance);
    max_h = std::max(max_h, res.max_height_difference);
    if (!res.matched) {
      bij.pass = false;
      failures.push_back({{"replicate", r}, {"summary", res.match_summary}});
    }
  }
  bij.detail["replicates_checked"] = ok.size();
  bij.detail["max_distance"] = max_d;
  bij.detail["max_height_difference"] = max_h;
  bij.detail["failures"] = failures;
  rep.checks.push_back(bij);

  if (!ok.empty()) {
    const std::size_t cells = ok.front()->arms[0].counts.size();
    if (independent) {
      rep.checks.push_back(compare_tables("ensemble_counts", c, count_table(ok, 0, cells), count_table(ok, 2, cells), 1.0,
                                          static_cast<double>(ok.size()), true));
    } else {
      int worst = 0;
      for (const auto* r : ok)
        for (std::size_t j = 0; j < cells; ++j) worst = std::max(worst, std::abs(r->arms[0].counts[j] - r->arms[1].counts[j]));
      rep.checks.push_back({"count_differences", worst == 0, json{{"max_abs_difference", worst}}});
    }
  }
  finish(rep);
  return rep;
}

ExperimentReport run_verify_aniso(const ExperimentConfig& c) {
  const auto model = make_model(c);
  const Domain domain = make_domain(c);
  const Diffeomorphism f = make_map(c);
  const Mat a = f.matrix();
  const double det = std::abs(a.determinant());
  const bool independent = c.mode == RandomnessMode::independent;

  const auto results = run_replicates(c, [&](long r) {
    ReplicateResult res;
    const auto z = sample_for(c, model, replicate_seed(c, kArmPrimary, r));
    const auto zx = independent ? sample_for(c, model, replicate_seed(c, kArmSecond, r)) : z;
    const TransformedField x(zx, f);
    const auto cat_x = find_critical_points(x, domain, c.search);
    const auto cat_z = find_critical_points(*z, domain, c.search);
    if (reject_unstable(res, cat_x.refinement_stable, "X") || reject_unstable(res, cat_z.refinement_stable, "Z"))
      return res;
    res.arms.push_back(harvest(cat_x, c, r));
    res.arms.push_back(harvest(cat_z, c, r));
    return res;
  });

  ExperimentReport rep = start_report(c);
  collect(rep, results, {"x", "z"}, catalog_header(c.dim));
  const auto ok = accepted(results);
  if (!ok.empty()) {
    const std::size_t cells = ok.front()->arms[0].counts.size();
    const auto tx = count_table(ok, 0, cells);
    const auto tz = count_table(ok, 1, cells);
    rep.checks.push_back(compare_tables("scaling", c, tx, tz, det, static_cast<double>(ok.size()), true));

    Rng rng = substream(c.seed, kOracleCounts);
    const auto table = count_density_table(spectral_moments(model), c.thresholds, c.oracle_samples, rng);
    std::vector<MeanSe> predicted(cells);
    const std::size_t nu = c.thresholds.size();
    const double volume = domain.interior_volume();
    for (std::size_t j = 0; j < cells; ++j)
      predicted[j] = {det * volume * table[j / nu][j % nu].estimate, det * volume * table[j / nu][j % nu].std_error};
    rep.checks.push_back(compare_tables("oracle", c, tx, predicted, 1.0, static_cast<double>(ok.size()), false));

    const MeanSe sx = total_stat(ok, 0), sz = total_stat(ok, 1);
    const double ratio = sx.mean / sz.mean;
    const double se = ratio * std::hypot(sx.se / sx.mean, sz.se / sz.mean);
    rep.checks.push_back({"total_ratio", agree(ratio, det, se),
                          json{{"ratio", ratio}, {"std_error", se}, {"expected", det}, {"mean_total_x", sx.mean},
                               {"mean_total_z", sz.mean}}});
  }
  finish(rep);
  return rep;
}

ExperimentReport run_height_dist(const ExperimentConfig& c) {
  const auto model = make_model(c);
  const Domain domain = make_domain(c);
  const Diffeomorphism f = make_map(c);
  const double det = std::abs(f.matrix().determinant());
  const bool independent = c.mode == RandomnessMode::independent;
  Domain domain_x = domain;
  if (c.equalize_counts && det != 1.0) {
    const double s = std::pow(det, -1.0 / c.dim);
    domain_x = Domain::box(domain.lower(), domain.lower() + s * (domain.upper() - domain.lower()),
                           c.margin < 0.0 ? -1.0 : s * c.margin);
  }

  const auto results = run_replicates(c, [&](long r) {
    ReplicateResult res;
    const auto z = sample_for(c, model, replicate_seed(c, kArmPrimary, r));
    const auto zx = independent ? sample_for(c, model, replicate_seed(c, kArmSecond, r)) : z;
    const TransformedField x(zx, f);
    const auto cat_x = find_critical_points(x, domain_x, c.search);
    const auto cat_z = find_critical_points(*z, domain, c.search);
    if (reject_unstable(res, cat_x.refinement_stable, "X") || reject_unstable(res, cat_z.refinement_stable, "Z"))
      return res;
    res.arms.push_back(harvest(cat_x, c, r));
    res.arms.push_back(harvest(cat_z, c, r));
    return res;
  });

  ExperimentReport rep = start_report(c);
  collect(rep, results, {"x", "z"}, catalog_header(c.dim));
  const auto ok = accepted(results);
  const auto moments = spectral_moments(model);
  std::vector<double> finite_u;
  for (double u : c.thresholds)
    if (std::isfinite(u)) finite_u.push_back(u);
  const double middle = 0.5 * (domain.lower()[0] + domain.upper()[0]);

  json excluded = json::array();
  json curves = json::object();
  int compared = 0;
  for (int i = 0; i <= c.dim && !ok.empty(); ++i) {
    const Pool px = pool_heights(ok, 0, i), pz = pool_heights(ok, 1, i);
    const std::size_t limit = static_cast<std::size_t>(c.min_class_points);
    if (px.heights.size() < limit || pz.heights.size() < limit) {
      excluded.push_back({{"index", i}, {"n_x", px.heights.size()}, {"n_z", pz.heights.size()}});
      continue;
    }
    ++compared;
    const KsResult ks = ks_two_sample(px.heights, pz.heights);
    rep.checks.push_back({"ks_index_" + std::to_string(i), ks.p_value > 0.01, ks_json(ks, px.heights.size(), pz.heights.size())});

    const Pool left = pool_heights(ok, 1, i, [&](double t) { return t < middle; });
    const Pool right = pool_heights(ok, 1, i, [&](double t) { return t >= middle; });
    if (left.heights.size() >= limit && right.heights.size() >= limit) {
      const KsResult split = ks_two_sample(left.heights, right.heights);
      rep.checks.push_back({"location_index_" + std::to_string(i), split.p_value > 0.01,
                            ks_json(split, left.heights.size(), right.heights.size())});
    }

    if (finite_u.empty()) continue;
    Rng rng = substream(substream_seed(c.seed, kOracleHeights), static_cast<std::uint64_t>(i));
    const auto oracle = estimate_height_dist(moments, i, finite_u, c.height_samples, rng);
    json arm_curves = json::object();
    for (std::size_t arm = 0; arm < 2; ++arm) {
      const Pool& p = arm == 0 ? px : pz;
      Check ch{std::string("oracle_") + (arm == 0 ? "x" : "z") + "_index_" + std::to_string(i), oracle.reliable,
               json::object()};
      json rows = json::array();
      for (std::size_t k = 0; k < finite_u.size(); ++k) {
        const MeanSe s = pooled_survival(p, finite_u[k]);
        const double n = static_cast<double>(p.heights.size());
        const double q = oracle.survival[k];
        // few points on one side of u: floor by the binomial error under the null
        const bool sparse = std::min(s.mean, 1.0 - s.mean) * n < c.min_class_points;
        const double se_emp = sparse ? std::max(s.se, std::sqrt(q * (1.0 - q) / n)) : s.se;
        const double se = std::hypot(se_emp, oracle.std_error[k]);
        const bool good = agree(s.mean, oracle.survival[k], se);
        ch.pass = ch.pass && good;
        rows.push_back({{"u", format_double(finite_u[k])},
                        {"empirical", s.mean},
                        {"empirical_std_error", se_emp},
                        {"sparse", sparse},
                        {"oracle", oracle.survival[k]},
                        {"oracle_std_error", oracle.std_error[k]},
                        {"pass", good}});
      }
      ch.detail["effective_samples"] = oracle.effective_samples;
      ch.detail["rows"] = rows;
      arm_curves[arm == 0 ? "x" : "z"] = rows;
      rep.checks.push_back(ch);
    }
    curves[std::to_string(i)] = arm_curves;
  }
  rep.checks.push_back({"classes_compared", compared > 0, json{{"compared", compared}, {"excluded", excluded}}});
  rep.aggregates["survival"] = curves;
  rep.aggregates["x_domain_upper"] = std::vector<double>(domain_x.upper().data(), domain_x.upper().data() + c.dim);
  finish(rep);
  return rep;
}

ExperimentReport run_oracle_compare(const ExperimentConfig& c) {
  const auto model = make_model(c);
  const Domain domain = make_domain(c);
  const bool torus = domain.kind() == Domain::Kind::torus;

  const auto results = run_replicates(c, [&](long r) {
    ReplicateResult res;
    const auto z = sample_for(c, model, replicate_seed(c, kArmPrimary, r));
    const auto cat = find_critical_points(*z, domain, c.search);
    if (reject_unstable(res, cat.refinement_stable, "Z")) return res;
    res.arms.push_back(harvest(cat, c, r));
    res.morse.push_back(morse_sum(cat));
    return res;
  });

  ExperimentReport rep = start_report(c);
  collect(rep, results, {"z"}, catalog_header(c.dim));
  const auto ok = accepted(results);
  if (!ok.empty()) {
    const double volume = domain.interior_volume();
    const std::size_t cells = ok.front()->arms[0].counts.size();
    const std::size_t nu = c.thresholds.size();
    auto field = count_table(ok, 0, cells);
    for (auto& m : field) m = {m.mean / volume, m.se / volume};
    Rng rng = substream(c.seed, kOracleCounts);
    const auto table = count_density_table(spectral_moments(model), c.thresholds, c.oracle_samples, rng);
    std::vector<MeanSe> oracle(cells);
    for (std::size_t j = 0; j < cells; ++j) oracle[j] = {table[j / nu][j % nu].estimate, table[j / nu][j % nu].std_error};
    rep.checks.push_back(compare_tables("density", c, field, oracle, 1.0, volume * static_cast<double>(ok.size()), false));

    // maxima and minima share replicates, so use per-replicate differences
    std::vector<double> diff;
    for (const auto* r : ok) diff.push_back((r->arms[0].totals[c.dim] - r->arms[0].totals[0]) / volume);
    const MeanSe d = mean_se(diff);
    rep.checks.push_back({"symmetry", agree(d.mean, 0.0, d.se),
                          json{{"max_minus_min_density", d.mean}, {"std_error", d.se}}});

    std::vector<double> rates;
    for (const auto* r : ok) rates.push_back(static_cast<double>(r->arms[0].height.size()) / volume);
    const MeanSe rate = mean_se(rates);
    rep.aggregates["total_rate"] = {{"mean", rate.mean}, {"std_error", rate.se}};
    if (c.dim == 1 && c.covariance == CovarianceKind::squared_exponential && c.length_scale == 1.0) {
      const double rice = std::sqrt(3.0) / std::numbers::pi;
      rep.checks.push_back({"rice_rate", agree(rate.mean, rice, rate.se),
                            json{{"rate", rate.mean}, {"std_error", rate.se}, {"expected", rice}}});
    }
    if (torus) {
      int bad = 0;
      for (const auto* r : ok) bad += r->morse[0] != 0;
      rep.checks.push_back({"morse_sum", bad == 0, json{{"expected", 0}, {"violations", bad}}});
    }
  }
  finish(rep);
  return rep;
}

ExperimentReport run_manifold(const ExperimentConfig& c) {
  const auto model = make_model(c);
  const Ellipsoid ell = make_ellipsoid(to_vec(c.semi_axes), Eigen::Map<const Eigen::Matrix3d>(c.rotation.data()).transpose());
  SurfaceSearchConfig sc;
  sc.cells_per_face = c.cells_per_face;
  sc.newton = c.search;

  const auto results = run_replicates(c, [&](long r) {
    ReplicateResult res;
    const SurfaceField sphere = sphere_field(sample_for(c, model, replicate_seed(c, kArmPrimary, r)));
    const SurfaceField surface = ellipsoid_field(sphere, ell);
    const auto cat_s = find_surface_critical_points(sphere, sc);
    const auto cat_e = find_surface_critical_points(surface, sc);
    if (reject_unstable(res, cat_s.refinement_stable, "sphere") ||
        reject_unstable(res, cat_e.refinement_stable, "ellipsoid"))
      return res;
    const auto report = verify_surface_correspondence(cat_e, cat_s, ell, c.tol_loc);
    res.matched = report.pass;
    res.match_summary = report.summary();
    res.max_distance = report.max_distance;
    res.max_height_difference = report.max_height_difference;
    res.morse = {morse_sum(cat_s), morse_sum(cat_e)};
    res.arms.push_back(harvest(cat_s, c, r));
    res.arms.push_back(harvest(cat_e, c, r));
    return res;
  });

  ExperimentReport rep = start_report(c);
  collect(rep, results, {"sphere", "ellipsoid"}, surface_header());
  Check corr{"correspondence", true, json::object()};
  json failures = json::array();
  int bad_sphere = 0, bad_ellipsoid = 0;
  for (long r = 0; r < c.replicates; ++r) {
    const auto& res = results[r];
    if (!res.ok) continue;
    bad_sphere += res.morse[0] != 2;
    bad_ellipsoid += res.morse[1] != 2;
    if (!res.matched) {
      corr.pass = false;
      failures.push_back({{"replicate", r}, {"summary", res.match_summary}});
    }
  }
  corr.detail["failures"] = failures;
  rep.checks.push_back(corr);
  rep.checks.push_back({"morse_sphere", bad_sphere == 0, json{{"expected", 2}, {"violations", bad_sphere}}});
  rep.checks.push_back({"morse_ellipsoid", bad_ellipsoid == 0, json{{"expected", 2}, {"violations", bad_ellipsoid}}});
  finish(rep);
  return rep;
}

ExperimentReport run_simulate(const ExperimentConfig& c) {
  const auto model = make_model(c);
  const Domain domain = make_domain(c);
  const Diffeomorphism f = make_map(c);
  const bool mapped = c.map.type != "identity";

  const auto results = run_replicates(c, [&](long r) {
    ReplicateResult res;
    const auto z = sample_for(c, model, replicate_seed(c, kArmPrimary, r));
    const auto cat = mapped ? find_critical_points(TransformedField(z, f), domain, c.search)
                            : find_critical_points(*z, domain, c.search);
    if (reject_unstable(res, cat.refinement_stable, "field")) return res;
    res.arms.push_back(harvest(cat, c, r));
    res.morse.push_back(morse_sum(cat));
    return res;
  });

  ExperimentReport rep = start_report(c);
  collect(rep, results, {"field"}, catalog_header(c.dim));
  if (domain.kind() == Domain::Kind::torus) {
    int bad = 0;
    for (const auto& r : results)
      if (r.ok) bad += r.morse[0] != 0;
    rep.checks.push_back({"morse_sum", bad == 0, json{{"expected", 0}, {"violations", bad}}});
  }
  finish(rep);
  return rep;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  validate_config(config);
  switch (config.kind) {
    case ExperimentKind::verify_diffeo: return run_verify_diffeo(config);
    case ExperimentKind::verify_aniso: return run_verify_aniso(config);
    case ExperimentKind::height_dist: return run_height_dist(config);
    case ExperimentKind::oracle_compare: return run_oracle_compare(config);
    case ExperimentKind::manifold: return run_manifold(config);
    case ExperimentKind::simulate: return run_simulate(config);
  }
  throw ConfigError("unknown experiment kind");
}

void write_report(const ExperimentReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto put = [&](const std::string& name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    out << text;
  };
  put("report.json", report.to_json().dump(2) + "\n");
  put("counts.csv", report.counts_csv);
  put("heights.csv", report.heights_csv);
  for (const auto& [name, text] : report.catalogs) put(name, text);
}

}  // namespace gfcrit
