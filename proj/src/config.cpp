#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <openssl/evp.h>

#include "gfcrit/experiment.hpp"

namespace gfcrit {

namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& allowed_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"experiment", {"kind", "replicates", "seed", "mode", "threads", "output", "write_catalogs"}},
      {"model", {"covariance", "length_scale", "dim", "waves"}},
      {"domain", {"kind", "lower", "upper", "period", "margin"}},
      {"map", {"type", "matrix"}},  // plus term1, term2, ...
      {"thresholds", {"u"}},
      {"search",
       {"seeds_per_wavelength", "min_cells", "max_newton_iterations", "max_doublings", "tol_grad", "tol_eig",
        "dedup_radius", "shuffle_seed", "tol_loc"}},
      {"oracle", {"samples", "height_samples"}},
      {"height", {"equalize_counts", "min_class_points"}},
      {"manifold", {"semi_axes", "rotation", "cells_per_face"}},
  };
  return keys;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& text, const std::string& key) {
  const std::string s = trim(text);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw ConfigError("bad number for " + key + ": '" + text + "'");
  return v;
}

long long parse_integer(const std::string& text, const std::string& key) {
  const std::string s = trim(text);
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size()) throw ConfigError("bad integer for " + key + ": '" + text + "'");
  return v;
}

std::uint64_t parse_unsigned(const std::string& text, const std::string& key) {
  const std::string s = trim(text);
  char* end = nullptr;
  if (!s.empty() && s[0] == '-') throw ConfigError("bad unsigned integer for " + key + ": '" + text + "'");
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size())
    throw ConfigError("bad unsigned integer for " + key + ": '" + text + "'");
  return v;
}

bool parse_bool(const std::string& text, const std::string& key) {
  const std::string s = trim(text);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("bad boolean for " + key + ": '" + text + "'");
}

std::vector<double> parse_list(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  std::vector<double> out;
  std::string token;
  while (in >> token) out.push_back(parse_number(token, key));
  return out;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream in(text);
  while (std::getline(in, part, sep)) parts.push_back(trim(part));
  return parts;
}

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

SineTerm parse_term(const std::string& text, const std::string& key) {
  const auto parts = split(text, '|');
  if (parts.size() != 4) throw ConfigError(key + ": expected 'amplitude | frequency | phase | direction'");
  SineTerm term;
  term.amplitude = parse_number(parts[0], key);
  term.frequency = to_vec(parse_list(parts[1], key));
  term.phase = parse_number(parts[2], key);
  term.direction = to_vec(parse_list(parts[3], key));
  return term;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? " " : "") + format_double(v[k]);
  return s;
}

std::string join(const Vec& v) { return join(std::vector<double>(v.data(), v.data() + v.size())); }

Mat row_major(const std::vector<double>& v, int n) {
  Mat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = v[static_cast<std::size_t>(i) * n + j];
  return m;
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::verify_diffeo: return "verify-diffeo";
    case ExperimentKind::verify_aniso: return "verify-aniso";
    case ExperimentKind::height_dist: return "height-dist";
    case ExperimentKind::oracle_compare: return "oracle-compare";
    case ExperimentKind::manifold: return "manifold";
    case ExperimentKind::simulate: return "simulate";
  }
  return "simulate";
}

ExperimentKind parse_experiment_kind(const std::string& name) {
  for (auto k : {ExperimentKind::verify_diffeo, ExperimentKind::verify_aniso, ExperimentKind::height_dist,
                 ExperimentKind::oracle_compare, ExperimentKind::manifold, ExperimentKind::simulate})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown experiment kind '" + name + "'");
}

std::string to_string(RandomnessMode mode) { return mode == RandomnessMode::shared ? "shared" : "independent"; }

RandomnessMode parse_randomness_mode(const std::string& name) {
  if (name == "shared") return RandomnessMode::shared;
  if (name == "independent") return RandomnessMode::independent;
  throw ConfigError("unknown mode '" + name + "' (expected shared or independent)");
}

ExperimentConfig parse_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    const auto it = allowed_keys().find(section);
    if (it == allowed_keys().end() || body.data().size())
      throw ConfigError("config: unknown section '" + section + "'");
    for (const auto& [key, value] : body) {
      const bool term = section == "map" && key.rfind("term", 0) == 0;
      if (!term && !it->second.count(key)) throw ConfigError("config: unknown key '" + section + "." + key + "'");
    }
  }
  const auto get = [&](const std::string& path) -> std::optional<std::string> {
    if (auto v = tree.get_optional<std::string>(pt::ptree::path_type(path, '.'))) return *v;
    return std::nullopt;
  };

  ExperimentConfig c;
  if (auto v = get("experiment.kind")) c.kind = parse_experiment_kind(trim(*v));
  if (auto v = get("experiment.replicates")) c.replicates = parse_integer(*v, "replicates");
  if (auto v = get("experiment.seed")) c.seed = parse_unsigned(*v, "seed");
  if (auto v = get("experiment.mode")) c.mode = parse_randomness_mode(trim(*v));
  if (auto v = get("experiment.threads")) c.threads = static_cast<int>(parse_integer(*v, "threads"));
  if (auto v = get("experiment.output")) c.output = trim(*v);
  if (auto v = get("experiment.write_catalogs")) c.write_catalogs = parse_bool(*v, "write_catalogs");

  if (auto v = get("model.covariance")) {
    try {
      c.covariance = parse_covariance_kind(trim(*v));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (auto v = get("model.length_scale")) c.length_scale = parse_number(*v, "length_scale");
  if (auto v = get("model.dim")) c.dim = static_cast<int>(parse_integer(*v, "dim"));
  if (auto v = get("model.waves")) c.waves = static_cast<int>(parse_integer(*v, "waves"));

  if (auto v = get("domain.kind")) c.domain = trim(*v);
  if (auto v = get("domain.lower")) c.lower = parse_list(*v, "lower");
  if (auto v = get("domain.upper")) c.upper = parse_list(*v, "upper");
  if (auto v = get("domain.period")) c.period = parse_number(*v, "period");
  if (auto v = get("domain.margin")) c.margin = parse_number(*v, "margin");

  if (auto v = get("map.type")) c.map.type = trim(*v);
  if (auto v = get("map.matrix")) c.map.matrix = parse_list(*v, "matrix");
  for (int k = 1;; ++k) {
    const auto v = get("map.term" + std::to_string(k));
    if (!v) break;
    c.map.terms.push_back(parse_term(*v, "term" + std::to_string(k)));
  }
  if (const auto section = tree.get_child_optional("map")) {
    std::size_t term_keys = 0;
    for (const auto& [key, value] : *section) term_keys += key.rfind("term", 0) == 0;
    if (term_keys != c.map.terms.size()) throw ConfigError("config: map terms must be numbered term1, term2, ...");
  }

  if (auto v = get("thresholds.u")) c.thresholds = parse_list(*v, "u");

  if (auto v = get("search.seeds_per_wavelength")) c.search.seeds_per_wavelength = parse_number(*v, "seeds_per_wavelength");
  if (auto v = get("search.min_cells")) c.search.min_cells = static_cast<int>(parse_integer(*v, "min_cells"));
  if (auto v = get("search.max_newton_iterations"))
    c.search.max_newton_iterations = static_cast<int>(parse_integer(*v, "max_newton_iterations"));
  if (auto v = get("search.max_doublings")) c.search.max_doublings = static_cast<int>(parse_integer(*v, "max_doublings"));
  if (auto v = get("search.tol_grad")) c.search.tol_grad = parse_number(*v, "tol_grad");
  if (auto v = get("search.tol_eig")) c.search.tol_eig = parse_number(*v, "tol_eig");
  if (auto v = get("search.dedup_radius")) c.search.dedup_radius = parse_number(*v, "dedup_radius");
  if (auto v = get("search.shuffle_seed")) c.search.shuffle_seed = parse_unsigned(*v, "shuffle_seed");
  if (auto v = get("search.tol_loc")) c.tol_loc = parse_number(*v, "tol_loc");

  if (auto v = get("oracle.samples")) c.oracle_samples = parse_integer(*v, "samples");
  if (auto v = get("oracle.height_samples")) c.height_samples = parse_integer(*v, "height_samples");
  if (auto v = get("height.equalize_counts")) c.equalize_counts = parse_bool(*v, "equalize_counts");
  if (auto v = get("height.min_class_points")) c.min_class_points = static_cast<int>(parse_integer(*v, "min_class_points"));

  if (auto v = get("manifold.semi_axes")) c.semi_axes = parse_list(*v, "semi_axes");
  if (auto v = get("manifold.rotation")) c.rotation = parse_list(*v, "rotation");
  if (auto v = get("manifold.cells_per_face")) c.cells_per_face = static_cast<int>(parse_integer(*v, "cells_per_face"));
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_config(in);
}

std::string write_config(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "[experiment]\n"
      << "kind = " << to_string(c.kind) << "\n"
      << "replicates = " << c.replicates << "\n"
      << "seed = " << c.seed << "\n"
      << "mode = " << to_string(c.mode) << "\n"
      << "threads = " << c.threads << "\n"
      << "output = " << c.output << "\n"
      << "write_catalogs = " << (c.write_catalogs ? "true" : "false") << "\n\n";
  out << "[model]\n"
      << "covariance = " << to_string(c.covariance) << "\n"
      << "length_scale = " << format_double(c.length_scale) << "\n"
      << "dim = " << c.dim << "\n"
      << "waves = " << c.waves << "\n\n";
  out << "[domain]\n"
      << "kind = " << c.domain << "\n"
      << "lower = " << join(c.lower) << "\n"
      << "upper = " << join(c.upper) << "\n"
      << "period = " << format_double(c.period) << "\n"
      << "margin = " << format_double(c.margin) << "\n\n";
  out << "[map]\n"
      << "type = " << c.map.type << "\n"
      << "matrix = " << join(c.map.matrix) << "\n";
  for (std::size_t k = 0; k < c.map.terms.size(); ++k) {
    const auto& t = c.map.terms[k];
    out << "term" << k + 1 << " = " << format_double(t.amplitude) << " | " << join(t.frequency) << " | "
        << format_double(t.phase) << " | " << join(t.direction) << "\n";
  }
  out << "\n[thresholds]\n"
      << "u = " << join(c.thresholds) << "\n\n";
  out << "[search]\n"
      << "seeds_per_wavelength = " << format_double(c.search.seeds_per_wavelength) << "\n"
      << "min_cells = " << c.search.min_cells << "\n"
      << "max_newton_iterations = " << c.search.max_newton_iterations << "\n"
      << "max_doublings = " << c.search.max_doublings << "\n"
      << "tol_grad = " << format_double(c.search.tol_grad) << "\n"
      << "tol_eig = " << format_double(c.search.tol_eig) << "\n"
      << "dedup_radius = " << format_double(c.search.dedup_radius) << "\n"
      << "shuffle_seed = " << c.search.shuffle_seed << "\n"
      << "tol_loc = " << format_double(c.tol_loc) << "\n\n";
  out << "[oracle]\n"
      << "samples = " << c.oracle_samples << "\n"
      << "height_samples = " << c.height_samples << "\n\n";
  out << "[height]\n"
      << "equalize_counts = " << (c.equalize_counts ? "true" : "false") << "\n"
      << "min_class_points = " << c.min_class_points << "\n\n";
  out << "[manifold]\n"
      << "semi_axes = " << join(c.semi_axes) << "\n"
      << "rotation = " << join(c.rotation) << "\n"
      << "cells_per_face = " << c.cells_per_face << "\n";
  return out.str();
}

CovarianceModel make_model(const ExperimentConfig& c) {
  try {
    return make_covariance(c.covariance, c.length_scale, c.dim);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

Domain make_domain(const ExperimentConfig& c) {
  if (c.domain == "torus") {
    if (!(c.period > 0.0)) throw ConfigError("torus domain needs period > 0");
    return Domain::torus(c.dim, c.period);
  }
  if (c.domain != "box") throw ConfigError("unknown domain kind '" + c.domain + "'");
  if (static_cast<int>(c.lower.size()) != c.dim || static_cast<int>(c.upper.size()) != c.dim)
    throw ConfigError("box domain needs lower and upper with dim entries");
  try {
    return Domain::box(to_vec(c.lower), to_vec(c.upper), c.margin);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

Diffeomorphism make_map(const ExperimentConfig& c) {
  const auto& m = c.map;
  const bool has_linear = m.type == "linear" || m.type == "composition";
  const bool has_sine = m.type == "sine-warp" || m.type == "composition";
  if (m.type != "identity" && !has_linear && !has_sine) throw ConfigError("unknown map type '" + m.type + "'");
  if (!has_linear && !m.matrix.empty()) throw ConfigError("map matrix given for a map without a linear part");
  if (!has_sine && !m.terms.empty()) throw ConfigError("sine terms given for a map without a warp");
  try {
    if (m.type == "identity") return Diffeomorphism::identity(c.dim);
    std::optional<Diffeomorphism> linear, warp;
    if (has_linear) {
      if (static_cast<int>(m.matrix.size()) != c.dim * c.dim) throw ConfigError("map matrix needs dim^2 entries");
      linear = Diffeomorphism::linear(row_major(m.matrix, c.dim));
    }
    if (has_sine) {
      if (m.terms.empty()) throw ConfigError("sine warp needs at least one term");
      warp = Diffeomorphism::sine_warp(c.dim, m.terms);
    }
    if (linear && warp) return Diffeomorphism::compose(*warp, *linear);
    return linear ? *linear : *warp;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("map: ") + e.what());
  }
}

Domain image_box(const ExperimentConfig& c, const Domain& domain) {
  if (domain.kind() != Domain::Kind::box) throw ConfigError("image_box: box domain required");
  Vec lo = domain.lower(), hi = domain.upper();
  if (c.map.type == "sine-warp" || c.map.type == "composition") {
    double shift = 0.0;
    for (const auto& t : c.map.terms) shift += std::abs(t.amplitude) * t.direction.cwiseAbs().maxCoeff();
    lo.array() -= shift;
    hi.array() += shift;
  }
  if (c.map.type == "linear" || c.map.type == "composition") {
    const Mat a = row_major(c.map.matrix, c.dim);
    Vec nlo = Vec::Constant(c.dim, std::numeric_limits<double>::infinity());
    Vec nhi = -nlo;
    for (int corner = 0; corner < (1 << c.dim); ++corner) {
      Vec p(c.dim);
      for (int d = 0; d < c.dim; ++d) p[d] = (corner >> d) & 1 ? hi[d] : lo[d];
      const Vec q = a * p;
      nlo = nlo.cwiseMin(q);
      nhi = nhi.cwiseMax(q);
    }
    lo = nlo;
    hi = nhi;
  }
  return Domain::box(lo, hi, 0.0);
}

void validate_config(const ExperimentConfig& c) {
  if (c.replicates < 1) throw ConfigError("replicates must be >= 1");
  if (c.threads < 1) throw ConfigError("threads must be >= 1");
  if (c.waves < 1) throw ConfigError("waves must be >= 1");
  make_model(c);
  // surfaces carry their own geometry; every other experiment needs a domain
  const bool box = c.kind == ExperimentKind::manifold || make_domain(c).kind() == Domain::Kind::box;
  const Diffeomorphism map = make_map(c);
  if (c.thresholds.empty()) throw ConfigError("thresholds.u must list at least one value");
  for (double u : c.thresholds)
    if (std::isnan(u)) throw ConfigError("thresholds.u contains nan");
  if (!(c.search.seeds_per_wavelength > 0.0) || c.search.min_cells < 1 || c.search.max_newton_iterations < 1 ||
      c.search.max_doublings < 1 || c.search.tol_grad < 0.0 || c.search.tol_eig < 0.0 || c.search.dedup_radius < 0.0)
    throw ConfigError("search settings out of range");
  if (!(c.tol_loc > 0.0)) throw ConfigError("tol_loc must be positive");
  if (c.oracle_samples < 2 || c.height_samples < 2) throw ConfigError("oracle sample counts must be >= 2");
  if (c.min_class_points < 1) throw ConfigError("min_class_points must be >= 1");

  const std::string kind = to_string(c.kind);
  switch (c.kind) {
    case ExperimentKind::verify_diffeo:
      if (!box) throw ConfigError(kind + " needs a box domain");
      break;
    case ExperimentKind::verify_aniso:
    case ExperimentKind::height_dist:
      if (!box) throw ConfigError(kind + " needs a box domain");
      if (!map.is_linear()) throw ConfigError(kind + " needs an identity or linear map");
      break;
    case ExperimentKind::oracle_compare:
      if (c.map.type != "identity") throw ConfigError(kind + " takes no map");
      break;
    case ExperimentKind::manifold: {
      if (c.dim != 3) throw ConfigError("manifold needs dim = 3");
      if (c.semi_axes.size() != 3 || c.rotation.size() != 9)
        throw ConfigError("manifold needs three semi_axes and a 9-entry rotation");
      if (c.cells_per_face < 2) throw ConfigError("cells_per_face must be >= 2");
      try {
        make_ellipsoid(to_vec(c.semi_axes), row_major(c.rotation, 3));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("manifold: ") + e.what());
      }
      break;
    }
    case ExperimentKind::simulate:
      if (!box && c.map.type != "identity") throw ConfigError("simulate on a torus takes no map");
      break;
  }
}

std::string config_hash(const ExperimentConfig& config) {
  ExperimentConfig c = config;
  c.threads = 1;
  c.output.clear();
  const std::string text = write_config(c);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &length, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("config_hash: digest failed");
  std::ostringstream hex;
  for (unsigned int k = 0; k < length; ++k) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[k]);
  return hex.str();
}

}  // namespace gfcrit
