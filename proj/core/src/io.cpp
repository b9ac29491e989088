#include "blompe/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "blompe/error.hpp"

namespace blompe::io {

namespace {

using Exception = nlohmann::ordered_json::exception;

void write_indent(std::string& out, int depth) { out.append(static_cast<std::size_t>(2 * depth), ' '); }

bool is_scalar(const Json& j) { return !j.is_object() && !j.is_array(); }

void write_value(std::string& out, const Json& j, int depth) {
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (const auto& [key, value] : j.items()) {
        if (!first) out += ",\n";
        first = false;
        write_indent(out, depth + 1);
        out += Json(key).dump();
        out += ": ";
        write_value(out, value, depth + 1);
      }
      out += '\n';
      write_indent(out, depth);
      out += '}';
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      bool flat = true;
      for (const auto& v : j) flat = flat && is_scalar(v);
      if (flat) {
        out += '[';
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) out += ", ";
          write_value(out, j[i], depth + 1);
        }
        out += ']';
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        write_indent(out, depth + 1);
        write_value(out, j[i], depth + 1);
      }
      out += '\n';
      write_indent(out, depth);
      out += ']';
      return;
    }
    case Json::value_t::number_float: {
      const double v = j.get<double>();
      out += std::isfinite(v) ? format_double(v) : "null";
      return;
    }
    default:
      out += j.dump();
  }
}

[[noreturn]] void input_error(std::string_view what, const std::string& message) {
  fail(Errc::input, std::string(what) + ": " + message);
}

const Json& field(const Json& j, std::string_view key, std::string_view what) {
  if (!j.is_object()) input_error(what, "expected a JSON object");
  const auto it = j.find(std::string(key));
  if (it == j.end()) input_error(what, "missing field '" + std::string(key) + "'");
  return *it;
}

template <class T>
T as(const Json& j, std::string_view what) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!j.is_boolean()) input_error(what, "expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!j.is_number_integer()) input_error(what, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (j.is_number_integer() && !j.is_number_unsigned()) input_error(what, "expected a non-negative integer");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!j.is_number()) input_error(what, "expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!j.is_string()) input_error(what, "expected a string");
    }
    return j.get<T>();
  } catch (const Exception& e) {
    input_error(what, e.what());
  }
}

template <class T>
T get(const Json& j, std::string_view key, std::string_view what) {
  return as<T>(field(j, key, what), std::string(what) + "." + std::string(key));
}

template <class T>
T get_or(const Json& j, std::string_view key, T fallback, std::string_view what) {
  if (!j.is_object()) input_error(what, "expected a JSON object");
  const auto it = j.find(std::string(key));
  if (it == j.end()) return fallback;
  return as<T>(*it, std::string(what) + "." + std::string(key));
}

std::string csv_quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (line.ends_with('\r')) line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

[[noreturn]] void csv_error(std::string_view source, std::size_t line, std::size_t column,
                            const std::string& message) {
  std::string where = std::string(source) + ":" + std::to_string(line);
  if (column > 0) where += ":" + std::to_string(column);
  fail(Errc::input, where + ": " + message);
}

double parse_number(std::string_view text, std::string_view source, std::size_t line,
                    std::size_t column) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (text.empty() || ec != std::errc() || ptr != last || !std::isfinite(value)) {
    csv_error(source, line, column, "invalid number '" + std::string(text) + "'");
  }
  return value;
}

std::string_view init_name(InitStrategy s) {
  return s == InitStrategy::kmeans ? "kmeans" : "random";
}

std::string_view combine_name(CombineMode m) {
  return m == CombineMode::matched_grid ? "matched_grid" : "shared";
}

Json summary_json(const OracleSummary& s) {
  Json j;
  j["n"] = s.n;
  j["cells"] = s.cells;
  j["failures"] = s.failures;
  j["median_selected_jkl"] = s.median_selected_jkl;
  j["mean_selected_jkl"] = s.mean_selected_jkl;
  j["mean_ratio"] = s.mean_ratio;
  j["max_ratio"] = s.max_ratio;
  j["ratio_le_3"] = s.ratio_le_3;
  j["truth_selected"] = s.truth_selected;
  return j;
}

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string dump(const Json& json) {
  std::string out;
  write_value(out, json, 0);
  out += '\n';
  return out;
}

Json parse_json(std::string_view text, std::string_view source) {
  try {
    return Json::parse(text);
  } catch (const Exception& e) {
    input_error(source, e.what());
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::input, "cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json read_json_file(const std::filesystem::path& path) {
  return parse_json(read_text_file(path), path.string());
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::input, "cannot open '" + path.string() + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) fail(Errc::input, "failed writing '" + path.string() + "'");
}

Json to_json(const Vector& v) {
  Json j = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

Json to_json(const Matrix& m) {
  Json j = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) j.push_back(to_json(Vector(m.row(r).transpose())));
  return j;
}

Vector vector_from_json(const Json& json, std::string_view what) {
  if (!json.is_array()) input_error(what, "expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(json.size()));
  for (std::size_t i = 0; i < json.size(); ++i) v(static_cast<Eigen::Index>(i)) = as<double>(json[i], what);
  return v;
}

Matrix matrix_from_json(const Json& json, std::string_view what) {
  if (!json.is_array()) input_error(what, "expected an array of rows");
  const auto rows = static_cast<Eigen::Index>(json.size());
  const Eigen::Index cols = rows ? static_cast<Eigen::Index>(json[0].size()) : 0;
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Vector row = vector_from_json(json[static_cast<std::size_t>(r)], what);
    if (row.size() != cols) input_error(what, "rows have different lengths");
    m.row(r) = row.transpose();
  }
  return m;
}

Json to_json(const Bounds& b) {
  Json j;
  j["a_pi"] = b.a_pi;
  j["A_c"] = b.A_c;
  j["a_Gamma"] = b.a_Gamma;
  j["A_Gamma"] = b.A_Gamma;
  j["lambda_m"] = b.lambda_m;
  j["lambda_M"] = b.lambda_M;
  j["T_upsilon"] = b.T_upsilon;
  return j;
}

Bounds bounds_from_json(const Json& json, Bounds b) {
  constexpr std::string_view what = "bounds";
  b.a_pi = get_or(json, "a_pi", b.a_pi, what);
  b.A_c = get_or(json, "A_c", b.A_c, what);
  b.a_Gamma = get_or(json, "a_Gamma", b.a_Gamma, what);
  b.A_Gamma = get_or(json, "A_Gamma", b.A_Gamma, what);
  b.lambda_m = get_or(json, "lambda_m", b.lambda_m, what);
  b.lambda_M = get_or(json, "lambda_M", b.lambda_M, what);
  b.T_upsilon = get_or(json, "T_upsilon", b.T_upsilon, what);
  return b;
}

Bounds bounds_from_json(const Json& json) { return bounds_from_json(json, Bounds{}); }

Json to_json(const BlockStructure& blocks) {
  Json j = Json::array();
  for (const auto& B : blocks) j.push_back(B.one_based_groups());
  return j;
}

BlockStructure blocks_from_json(const Json& json, int K, int D) {
  auto partition = [&](const Json& p) {
    if (!p.is_array()) fail(Errc::invalid_partition, "block partition must be a list of groups");
    std::vector<std::vector<int>> groups;
    for (const auto& g : p) {
      if (!g.is_array()) fail(Errc::invalid_partition, "block group must be a list of indices");
      std::vector<int> members;
      for (const auto& v : g) {
        if (!v.is_number_integer()) fail(Errc::invalid_partition, "block index must be an integer");
        members.push_back(v.get<int>());
      }
      groups.push_back(std::move(members));
    }
    BlockPartition B = BlockPartition::from_one_based(groups, D);
    if (B.one_based_groups() != groups) {
      warn("block partition " + p.dump() + " canonicalized to " + Json(B.one_based_groups()).dump());
    }
    return B;
  };
  if (!json.is_array() || json.empty()) {
    fail(Errc::invalid_partition, "blocks must be a non-empty list");
  }
  const bool per_cluster = json[0].is_array() && !json[0].empty() && json[0][0].is_array();
  BlockStructure out;
  if (per_cluster) {
    if (json.size() != static_cast<std::size_t>(K)) {
      fail(Errc::invalid_partition, "expected " + std::to_string(K) + " block partitions, got " +
                                        std::to_string(json.size()));
    }
    for (const auto& p : json) out.push_back(partition(p));
  } else {
    out.assign(static_cast<std::size_t>(K), partition(json));
  }
  return out;
}

Json to_json(const ModelIndex& index) {
  Json j;
  j["K"] = index.K;
  j["d"] = index.d;
  j["L"] = index.L;
  j["D"] = index.D();
  j["blocks"] = to_json(index.blocks);
  return j;
}

ModelIndex index_from_json(const Json& json) {
  constexpr std::string_view what = "index";
  ModelIndex index;
  index.K = get<int>(json, "K", what);
  index.d = get<int>(json, "d", what);
  index.L = get<int>(json, "L", what);
  const int D = get<int>(json, "D", what);
  index.blocks = blocks_from_json(field(json, "blocks", what), index.K, D);
  index.validate();
  return index;
}

Json to_json(const BlompeModel& model) {
  Json j;
  j["format"] = "blompe-model";
  j["direction"] = "inverse";
  j["K"] = model.K();
  j["d"] = model.d();
  j["L"] = model.L();
  j["D"] = model.D();
  j["monomial_order"] = "grlex";
  j["monomials"] = model.monomials();
  j["blocks"] = to_json(model.index().blocks);
  j["pi"] = to_json(model.gating().weights);
  Json c = Json::array(), gamma = Json::array(), alpha = Json::array(), sigma = Json::array();
  for (int k = 0; k < model.K(); ++k) {
    const auto s = static_cast<std::size_t>(k);
    c.push_back(to_json(model.gating().means[s]));
    gamma.push_back(to_json(model.gating().covariances[s]));
    alpha.push_back(to_json(model.experts().coeffs[s]));
    sigma.push_back(to_json(model.experts().covariances[s]));
  }
  j["c"] = std::move(c);
  j["Gamma"] = std::move(gamma);
  j["alpha"] = std::move(alpha);
  j["Sigma"] = std::move(sigma);
  j["bounds"] = to_json(model.bounds());
  return j;
}

BlompeModel model_from_json(const Json& json) {
  constexpr std::string_view what = "model";
  if (json.contains("format") && json["format"] != "blompe-model") {
    input_error(what, "not a blompe-model document");
  }
  if (json.contains("monomial_order") && json["monomial_order"] != "grlex") {
    input_error(what, "unsupported monomial order");
  }
  ModelIndex index;
  index.K = get<int>(json, "K", what);
  index.d = get<int>(json, "d", what);
  index.L = get<int>(json, "L", what);
  const int D = get<int>(json, "D", what);
  if (index.K < 1 || D < 1 || index.L < 1 || index.d < 0) input_error(what, "invalid K, d, L or D");
  index.blocks = blocks_from_json(field(json, "blocks", what), index.K, D);

  const auto K = static_cast<std::size_t>(index.K);
  auto per_cluster = [&](std::string_view key) {
    const Json& arr = field(json, key, what);
    if (!arr.is_array() || arr.size() != K) {
      input_error(what, "'" + std::string(key) + "' must hold one entry per component");
    }
    return arr;
  };
  GatingParams gating;
  gating.weights = vector_from_json(field(json, "pi", what), "model.pi");
  ExpertParams experts;
  const Json c = per_cluster("c"), gamma = per_cluster("Gamma");
  const Json alpha = per_cluster("alpha"), sigma = per_cluster("Sigma");
  for (std::size_t k = 0; k < K; ++k) {
    gating.means.push_back(vector_from_json(c[k], "model.c"));
    gating.covariances.push_back(matrix_from_json(gamma[k], "model.Gamma"));
    experts.coeffs.push_back(matrix_from_json(alpha[k], "model.alpha"));
    experts.covariances.push_back(matrix_from_json(sigma[k], "model.Sigma"));
  }
  const Bounds bounds = json.contains("bounds") ? bounds_from_json(json["bounds"]) : Bounds{};
  return BlompeModel(std::move(index), std::move(gating), std::move(experts), bounds);
}

Json to_json(const ForwardParams& fwd) {
  Json j;
  j["format"] = "blompe-forward";
  j["direction"] = "forward";
  j["K"] = fwd.K();
  j["D"] = fwd.D();
  j["L"] = fwd.L();
  j["pi_star"] = to_json(fwd.weights);
  Json c = Json::array(), gamma = Json::array(), A = Json::array(), b = Json::array(),
       sigma = Json::array();
  for (std::size_t k = 0; k < static_cast<std::size_t>(fwd.K()); ++k) {
    c.push_back(to_json(fwd.means[k]));
    gamma.push_back(to_json(fwd.covariances[k]));
    A.push_back(to_json(fwd.slopes[k]));
    b.push_back(to_json(fwd.intercepts[k]));
    sigma.push_back(to_json(fwd.noise[k]));
  }
  j["c_star"] = std::move(c);
  j["Gamma_star"] = std::move(gamma);
  j["A_star"] = std::move(A);
  j["b_star"] = std::move(b);
  j["Sigma_star"] = std::move(sigma);
  return j;
}

Json fit_report(const FitResult& fit, const Dataset& data) {
  Json j;
  j["index"] = to_json(fit.model.index());
  j["n"] = data.n();
  j["nll"] = fit.nll;
  j["dim"] = fit.dim;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["start_index"] = fit.start_index;
  j["eta"] = fit.eta;
  j["loglik_trace"] = fit.loglik_trace;
  Json projected = Json::array();
  for (bool p : fit.projected) projected.push_back(p);
  j["projected"] = std::move(projected);
  j["diagnostics"] = fit.diagnostics;
  Json scaling;
  scaling["applied"] = data.scaling().applied;
  if (data.scaling().applied) {
    scaling["offset"] = to_json(data.scaling().offset);
    scaling["scale"] = to_json(data.scaling().scale);
  }
  j["covariate_scaling"] = std::move(scaling);
  return j;
}

Json selection_report(const SelectionRun& run) {
  const auto& table = run.fitted.table;
  const auto& row = table.rows.at(run.result.selected_row);
  Json j;
  j["n"] = table.n;
  j["selected"] = to_json(run.result.selected);
  j["selected_row"] = run.result.selected_row;
  j["selected_nll"] = row.nll;
  j["selected_dim"] = row.dim;
  j["kappa_hat"] = run.result.kappa_hat;
  j["kappa_used"] = run.result.kappa_used;
  j["method"] = std::string(to_string(run.result.method));
  j["pen_shape"] = "dim * (1 + ln n)";
  j["collection_size"] = run.collection.indices.size();
  j["table_size"] = table.rows.size();
  Json warnings = Json::array();
  for (const auto& w : run.collection.warnings) warnings.push_back(w);
  for (const auto& w : run.fitted.warnings) warnings.push_back(w);
  j["warnings"] = std::move(warnings);
  return j;
}

Json divergence_report(const PairedDivergences& div, std::size_t n_designs) {
  const double c = c_rho(div.rho);
  const double upper = jkl_upper_bound(div.rho);
  Json j;
  j["kl"] = div.kl.value;  // null when infinite
  j["jkl"] = div.jkl.value;
  j["hellinger"] = div.hellinger.value;
  j["hellinger_raw"] = div.hellinger.raw_value;
  j["kl_infinite"] = div.kl.infinite;
  j["rho"] = div.rho;
  j["n_designs"] = n_designs;
  j["n_samples"] = div.kl.n_samples;
  Json se;
  se["kl"] = div.kl.std_error;
  se["jkl"] = div.jkl.std_error;
  se["hellinger"] = div.hellinger.std_error;
  se["kl_minus_jkl"] = div.se_kl_minus_jkl;
  se["jkl_minus_c_rho_hellinger"] = div.se_jkl_minus_c_hellinger;
  j["std_errors"] = std::move(se);
  Json checks;
  checks["c_rho"] = c;
  checks["jkl_upper_bound"] = upper;
  checks["c_rho_hellinger_le_jkl"] =
      c * div.hellinger.raw_value <= div.jkl.value + 4.0 * div.se_jkl_minus_c_hellinger;
  checks["jkl_le_kl"] = div.kl.infinite || div.jkl.value <= div.kl.value + 4.0 * div.se_kl_minus_jkl;
  checks["jkl_le_upper_bound"] = div.jkl.value <= upper + 4.0 * div.jkl.std_error;
  j["bound_checks"] = std::move(checks);
  return j;
}

Json to_json(const FitConfig& config) {
  Json j;
  j["max_iters"] = config.max_iters;
  j["rel_tol"] = config.rel_tol;
  j["n_starts"] = config.n_starts;
  j["seed"] = config.seed;
  j["init"] = std::string(init_name(config.init));
  j["bounds"] = to_json(config.bounds);
  return j;
}

FitConfig fit_config_from_json(const Json& json, FitConfig base) {
  constexpr std::string_view what = "fit";
  base.max_iters = get_or(json, "max_iters", base.max_iters, what);
  base.rel_tol = get_or(json, "rel_tol", base.rel_tol, what);
  base.n_starts = get_or(json, "n_starts", base.n_starts, what);
  base.seed = get_or<std::uint64_t>(json, "seed", base.seed, what);
  const std::string init = get_or<std::string>(json, "init", std::string(init_name(base.init)), what);
  if (init == "kmeans") {
    base.init = InitStrategy::kmeans;
  } else if (init == "random") {
    base.init = InitStrategy::random_responsibilities;
  } else {
    input_error(what, "unknown init '" + init + "' (kmeans, random)");
  }
  if (json.contains("bounds")) base.bounds = bounds_from_json(json["bounds"], base.bounds);
  return base;
}

Json to_json(const DetectConfig& config) {
  Json j;
  j["threshold_count"] = config.threshold_count;
  j["max_structures"] = config.max_structures;
  j["include_one_block"] = config.include_one_block;
  j["combine"] = std::string(combine_name(config.combine));
  return j;
}

DetectConfig detect_config_from_json(const Json& json, DetectConfig base) {
  constexpr std::string_view what = "detect";
  base.threshold_count = get_or(json, "threshold_count", base.threshold_count, what);
  base.max_structures = get_or(json, "max_structures", base.max_structures, what);
  base.include_one_block = get_or(json, "include_one_block", base.include_one_block, what);
  const std::string mode = get_or<std::string>(json, "combine", std::string(combine_name(base.combine)), what);
  if (mode == "matched_grid") {
    base.combine = CombineMode::matched_grid;
  } else if (mode == "shared") {
    base.combine = CombineMode::shared;
  } else {
    input_error(what, "unknown combine mode '" + mode + "' (matched_grid, shared)");
  }
  return base;
}

Json to_json(const SlopeConfig& config) {
  Json j;
  j["method"] = std::string(to_string(config.method));
  j["fraction"] = config.fraction;
  j["grid_size"] = config.grid_size;
  return j;
}

SlopeConfig slope_config_from_json(const Json& json, SlopeConfig base) {
  constexpr std::string_view what = "slope";
  if (json.contains("method")) {
    try {
      base.method = slope_method_from_string(as<std::string>(json["method"], "slope.method"));
    } catch (const Error& e) {
      input_error(what, e.what());
    }
  }
  base.fraction = get_or(json, "fraction", base.fraction, what);
  base.grid_size = get_or(json, "grid_size", base.grid_size, what);
  return base;
}

TrueModelSpec true_model_spec_from_json(const Json& json) {
  constexpr std::string_view what = "true_model_spec";
  TrueModelSpec spec;
  spec.K = get_or(json, "K", spec.K, what);
  spec.d = get_or(json, "d", spec.d, what);
  spec.D = get_or(json, "D", spec.D, what);
  spec.L = get_or(json, "L", spec.L, what);
  if (spec.K < 1 || spec.D < 1) input_error(what, "K and D must be positive");
  if (json.contains("blocks")) spec.blocks = blocks_from_json(json["blocks"], spec.K, spec.D);
  spec.separation = get_or(json, "separation", spec.separation, what);
  spec.noise_scale = get_or(json, "noise_scale", spec.noise_scale, what);
  spec.coef_scale = get_or(json, "coef_scale", spec.coef_scale, what);
  spec.corr_min = get_or(json, "corr_min", spec.corr_min, what);
  spec.corr_max = get_or(json, "corr_max", spec.corr_max, what);
  spec.seed = get_or<std::uint64_t>(json, "seed", spec.seed, what);
  if (json.contains("bounds")) spec.bounds = bounds_from_json(json["bounds"], spec.bounds);
  return spec;
}

Scenario scenario_from_json(const Json& json) {
  constexpr std::string_view what = "scenario";
  if (!json.is_object()) input_error(what, "expected a JSON object");
  BlompeModel truth = json.contains("true_model")
                          ? model_from_json(json["true_model"])
                          : make_true_model(true_model_spec_from_json(field(json, "true_model_spec", what)));
  Scenario s(std::move(truth));
  s.n_grid = get<std::vector<std::size_t>>(json, "n_grid", what);
  s.seeds = get<std::vector<std::uint64_t>>(json, "seeds", what);
  s.K_max = get_or(json, "K_max", s.K_max, what);
  s.d_max = get_or(json, "d_max", s.d_max, what);
  if (json.contains("detect")) s.detect = detect_config_from_json(json["detect"]);
  if (json.contains("fit")) s.fit = fit_config_from_json(json["fit"]);
  if (json.contains("slope")) s.slope = slope_config_from_json(json["slope"]);
  if (json.contains("mc")) {
    const Json& mc = json["mc"];
    s.n_designs = get_or(mc, "n_designs", s.n_designs, "scenario.mc");
    s.mc_samples = get_or(mc, "n_samples", s.mc_samples, "scenario.mc");
    s.rho = get_or(mc, "rho", s.rho, "scenario.mc");
  }
  return s;
}

Json oracle_report(const OracleReport& report, const Scenario& scenario) {
  Json j;
  Json sc;
  sc["true_index"] = to_json(scenario.true_model.index());
  sc["n_grid"] = scenario.n_grid;
  sc["seeds"] = scenario.seeds;
  sc["K_max"] = scenario.K_max;
  sc["d_max"] = scenario.d_max;
  sc["n_designs"] = scenario.n_designs;
  sc["mc_samples"] = scenario.mc_samples;
  sc["rho"] = scenario.rho;
  j["scenario"] = std::move(sc);
  j["note"] =
      "ratios are per seed; their mean over seeds is a Monte-Carlo approximation of the "
      "expectation over data";
  Json cells = Json::array();
  for (const auto& cell : report.cells) {
    Json c;
    c["n"] = cell.n;
    c["seed"] = cell.seed;
    c["ok"] = cell.ok;
    if (!cell.ok) {
      c["error"] = cell.error;
      cells.push_back(std::move(c));
      continue;
    }
    c["selected"] = to_json(cell.selected);
    c["selected_is_truth"] = cell.selected_is_truth;
    c["kappa_used"] = cell.kappa_used;
    c["selected_jkl"] = cell.selected_jkl;
    c["selected_jkl_se"] = cell.selected_jkl_se;
    c["selected_kl"] = cell.selected_kl;
    c["oracle"] = cell.oracle;
    c["oracle_index"] = to_json(cell.oracle_index);
    c["ratio"] = cell.ratio;
    c["table_size"] = cell.table_size;
    cells.push_back(std::move(c));
  }
  j["cells"] = std::move(cells);
  Json summaries = Json::array();
  for (const auto& s : report.summaries) summaries.push_back(summary_json(s));
  j["summaries"] = std::move(summaries);
  j["median_inversions"] = report.median_inversions;
  return j;
}

std::string oracle_cells_csv(const OracleReport& report) {
  std::string out =
      "n,seed,ok,K,d,blocks,selected_is_truth,kappa_used,selected_jkl,selected_jkl_se,"
      "oracle,ratio,table_size\n";
  for (const auto& c : report.cells) {
    out += std::to_string(c.n) + "," + std::to_string(c.seed) + "," + (c.ok ? "true" : "false");
    if (c.ok) {
      out += "," + std::to_string(c.selected.K) + "," + std::to_string(c.selected.d) + "," +
             csv_quote(to_json(c.selected.blocks).dump()) + "," +
             (c.selected_is_truth ? "true" : "false") + "," + format_double(c.kappa_used) + "," +
             format_double(c.selected_jkl) + "," + format_double(c.selected_jkl_se) + "," +
             format_double(c.oracle) + "," + format_double(c.ratio) + "," +
             std::to_string(c.table_size);
    } else {
      out += ",,,,,,,,,,";
    }
    out += '\n';
  }
  return out;
}

std::vector<std::string> split_csv_record(std::string_view line, std::string_view source,
                                          std::size_t line_number) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current += ch;
      }
    } else if (ch == ',') {
      fields.push_back(std::move(current));
      current.clear();
      was_quoted = false;
    } else if (ch == '"') {
      if (!current.empty() || was_quoted) {
        csv_error(source, line_number, fields.size() + 1, "unexpected quote inside a field");
      }
      quoted = was_quoted = true;
    } else {
      if (was_quoted) csv_error(source, line_number, fields.size() + 1, "text after a closing quote");
      current += ch;
    }
  }
  if (quoted) csv_error(source, line_number, fields.size() + 1, "unterminated quoted field");
  fields.push_back(std::move(current));
  return fields;
}

Dataset parse_data_csv(std::string_view text, std::string_view source, UnitBoxPolicy policy) {
  const auto lines = split_lines(text);
  if (lines.empty()) csv_error(source, 1, 0, "empty file; expected header y_1..y_L,x_1..x_D");
  const auto header = split_csv_record(lines[0], source, 1);
  std::size_t L = 0;
  while (L < header.size() && header[L] == "y_" + std::to_string(L + 1)) ++L;
  std::size_t D = 0;
  while (L + D < header.size() && header[L + D] == "x_" + std::to_string(D + 1)) ++D;
  if (L == 0 || D == 0 || L + D != header.size()) {
    const std::size_t col = (L == 0) ? 1 : (L + D < header.size() ? L + D + 1 : header.size());
    csv_error(source, 1, col,
              "expected header y_1,...,y_L,x_1,...,x_D with L, D >= 1 (got '" +
                  header[std::min(col - 1, header.size() - 1)] + "')");
  }
  std::size_t rows = lines.size() - 1;
  while (rows > 0 && lines[rows].empty()) --rows;  // trailing blank lines
  if (rows == 0) csv_error(source, 2, 0, "no observations");
  Matrix X(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(D));
  Matrix Y(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(L));
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t line_no = r + 2;
    const auto fields = split_csv_record(lines[r + 1], source, line_no);
    if (fields.size() != L + D) {
      csv_error(source, line_no, 0,
                "expected " + std::to_string(L + D) + " fields, got " + std::to_string(fields.size()));
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const double v = parse_number(fields[c], source, line_no, c + 1);
      if (c < L) {
        Y(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
      } else {
        X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c - L)) = v;
      }
    }
  }
  return Dataset(std::move(X), std::move(Y), policy);
}

Dataset read_data_csv(const std::filesystem::path& path, UnitBoxPolicy policy) {
  return parse_data_csv(read_text_file(path), path.string(), policy);
}

std::string data_csv(const Matrix& X, const Matrix& Y) {
  if (X.rows() != Y.rows()) fail(Errc::dimension, "X and Y row counts differ");
  std::string out;
  for (Eigen::Index l = 0; l < Y.cols(); ++l) out += (l ? ",y_" : "y_") + std::to_string(l + 1);
  for (Eigen::Index j = 0; j < X.cols(); ++j) out += ",x_" + std::to_string(j + 1);
  out += '\n';
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index l = 0; l < Y.cols(); ++l) {
      if (l) out += ',';
      out += format_double(Y(i, l));
    }
    for (Eigen::Index j = 0; j < X.cols(); ++j) out += "," + format_double(X(i, j));
    out += '\n';
  }
  return out;
}

namespace {
constexpr std::string_view kTableHeader = "K,d,L,n,blocks,nll,dim,pen_shape,converged,iterations";
}

std::string table_csv(const SelectionTable& table) {
  std::string out = std::string(kTableHeader) + "\n";
  for (const auto& r : table.rows) {
    out += std::to_string(r.index.K) + "," + std::to_string(r.index.d) + "," +
           std::to_string(r.index.L) + "," + std::to_string(table.n) + "," +
           csv_quote(to_json(r.index.blocks).dump()) + "," + format_double(r.nll) + "," +
           std::to_string(r.dim) + "," + format_double(r.pen_shape) + "," +
           (r.converged ? "true" : "false") + "," + std::to_string(r.iterations) + "\n";
  }
  return out;
}

SelectionTable parse_table_csv(std::string_view text, std::string_view source) {
  const auto lines = split_lines(text);
  if (lines.empty() || lines[0] != kTableHeader) {
    csv_error(source, 1, 0, "expected header " + std::string(kTableHeader));
  }
  SelectionTable table;
  auto integer = [&](const std::string& s, std::size_t line, std::size_t col) {
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || v < 0) {
      csv_error(source, line, col, "invalid non-negative integer '" + s + "'");
    }
    return v;
  };
  for (std::size_t r = 1; r < lines.size(); ++r) {
    if (lines[r].empty()) {
      if (r + 1 == lines.size()) break;
      csv_error(source, r + 1, 0, "empty line");
    }
    const auto f = split_csv_record(lines[r], source, r + 1);
    if (f.size() != 10) {
      csv_error(source, r + 1, 0, "expected 10 fields, got " + std::to_string(f.size()));
    }
    SelectionRow row;
    row.index.K = static_cast<int>(integer(f[0], r + 1, 1));
    row.index.d = static_cast<int>(integer(f[1], r + 1, 2));
    row.index.L = static_cast<int>(integer(f[2], r + 1, 3));
    const auto n = static_cast<std::size_t>(integer(f[3], r + 1, 4));
    if (r == 1) {
      table.n = n;
    } else if (n != table.n) {
      csv_error(source, r + 1, 4, "sample size differs from previous rows");
    }
    try {
      const Json blocks = Json::parse(f[4]);
      if (!blocks.is_array() || blocks.empty() || !blocks[0].is_array()) {
        fail(Errc::invalid_partition, "expected a list of per-cluster partitions");
      }
      int D = 0;
      for (const auto& g : blocks[0]) D += static_cast<int>(g.size());
      row.index.blocks = blocks_from_json(blocks, row.index.K, D);
      row.index.validate();
    } catch (const std::exception& e) {
      csv_error(source, r + 1, 5, std::string("invalid blocks: ") + e.what());
    }
    row.nll = parse_number(f[5], source, r + 1, 6);
    row.dim = static_cast<int>(integer(f[6], r + 1, 7));
    row.pen_shape = parse_number(f[7], source, r + 1, 8);
    if (f[8] != "true" && f[8] != "false") csv_error(source, r + 1, 9, "expected true or false");
    row.converged = f[8] == "true";
    row.iterations = static_cast<int>(integer(f[9], r + 1, 10));
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string slope_csv(const SelectionTable& table, int grid_size) {
  std::string out = "series,x,y\n";
  for (const auto& r : table.rows) {
    out += "nll_vs_pen," + format_double(r.pen_shape) + "," + format_double(r.nll) + "\n";
  }
  for (const auto& [kappa, dim] : selected_dim_curve(table, grid_size)) {
    out += "dim_vs_kappa," + format_double(kappa) + "," + std::to_string(dim) + "\n";
  }
  return out;
}

}  // namespace blompe::io
