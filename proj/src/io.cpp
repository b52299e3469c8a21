#include "sbart/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <locale>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sbart/error.hpp"
#include "sbart/preprocess.hpp"

namespace sbart {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
  return std::string(s.substr(a, b - a));
}

std::vector<std::string> split_fields(std::string_view line, std::size_t row) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false, was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = was_quoted = true;
    } else if (c == ',') {
      out.push_back(was_quoted ? cur : trim(cur));
      cur.clear();
      was_quoted = false;
    } else {
      cur += c;
    }
  }
  if (quoted) throw DataError("row " + std::to_string(row) + ": unterminated quote");
  out.push_back(was_quoted ? cur : trim(cur));
  return out;
}

bool parse_double(const std::string& s, double& v) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string cell_ref(std::size_t row, const std::string& col) {
  return "row " + std::to_string(row) + ", column '" + col + "'";
}

}  // namespace

std::map<int, std::size_t> Dataset::histogram() const {
  std::map<int, std::size_t> h;
  for (int v : y) ++h[v];
  return h;
}

Dataset Dataset::select_vars(std::span<const std::size_t> vars) const {
  Dataset d = *this;
  d.X = X.select_cols(vars);
  d.names.clear();
  for (std::size_t v : vars) {
    if (v >= names.size()) throw UsageError("variable index " + std::to_string(v) + " out of range");
    d.names.push_back(names[v]);
  }
  return d;
}

Dataset Dataset::select_rows(std::span<const std::size_t> rows) const {
  Dataset d = *this;
  d.X = X.select_rows(rows);
  d.y.clear();
  d.response.clear();
  for (std::size_t r : rows) {
    if (!y.empty()) d.y.push_back(y[r]);
    if (!response.empty()) d.response.push_back(response[r]);
  }
  return d;
}

std::size_t Dataset::var_index(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw UsageError("no predictor named '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

Dataset read_csv(std::istream& is, const LabelSpec& spec, const std::string& source) {
  if (!spec.label_col.empty() && !spec.adulteration_col.empty())
    throw UsageError("give either a label column or an adulteration column, not both");
  std::stringstream buf;
  buf << is.rdbuf();
  const std::string text = buf.str();

  Dataset d;
  d.source = source;
  d.checksum = fnv1a_hex(text);

  std::vector<std::string_view> lines;
  for (std::size_t pos = 0; pos < text.size();) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    lines.emplace_back(text.data() + pos, end - pos);
    pos = end + 1;
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw DataError(source + ": empty file");

  std::vector<std::string> header = split_fields(lines[0], 0);
  if (!header.empty() && header[0].starts_with("\xEF\xBB\xBF")) header[0].erase(0, 3);
  const std::string& target = spec.label_col.empty() ? spec.adulteration_col : spec.label_col;
  int label_pos = -1;
  std::vector<std::size_t> pred_pos;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (!target.empty() && header[c] == target) {
      label_pos = static_cast<int>(c);
    } else if (std::find(spec.ignore.begin(), spec.ignore.end(), header[c]) == spec.ignore.end()) {
      pred_pos.push_back(c);
      d.names.push_back(header[c]);
    }
  }
  if (!target.empty() && label_pos < 0) throw DataError(source + ": no column named '" + target + "'");
  if (pred_pos.empty()) throw DataError(source + ": no predictor columns");

  const std::size_t n = lines.size() - 1;
  std::vector<double> values;
  values.reserve(n * pred_pos.size());
  std::vector<std::string> labels;
  for (std::size_t r = 1; r <= n; ++r) {
    const auto fields = split_fields(lines[r], r);
    if (fields.size() != header.size())
      throw DataError("row " + std::to_string(r) + ": expected " + std::to_string(header.size()) +
                      " columns, found " + std::to_string(fields.size()));
    for (std::size_t c : pred_pos) {
      const std::string& f = fields[c];
      double v;
      if (f.empty()) throw DataError(cell_ref(r, header[c]) + ": missing value");
      if (!parse_double(f, v)) throw DataError(cell_ref(r, header[c]) + ": non-numeric value '" + f + "'");
      if (!std::isfinite(v)) throw DataError(cell_ref(r, header[c]) + ": non-finite value");
      values.push_back(v);
    }
    if (label_pos >= 0) {
      const std::string& f = fields[static_cast<std::size_t>(label_pos)];
      if (f.empty()) throw DataError(cell_ref(r, target) + ": missing label");
      labels.push_back(f);
    }
  }
  d.X = Matrix(n, pred_pos.size(), std::move(values));
  if (label_pos < 0) return d;

  if (!spec.adulteration_col.empty()) {
    d.label_name = "class";
    for (std::size_t r = 0; r < n; ++r) {
      double pct;
      if (!parse_double(labels[r], pct))
        throw DataError(cell_ref(r + 1, target) + ": non-numeric adulteration level '" + labels[r] + "'");
      try {
        d.y.push_back(aggregate_classes(pct));
      } catch (const DataError& e) {
        throw DataError(cell_ref(r + 1, target) + ": " + e.what());
      }
    }
    return d;
  }

  d.label_name = target;
  bool numeric = true, integral = true;
  for (const auto& s : labels) {
    double v;
    if (!parse_double(s, v) || !std::isfinite(v)) {
      numeric = false;
      break;
    }
    d.response.push_back(v);
    integral = integral && v == std::round(v) && std::abs(v) < 1e9;
  }
  if (numeric) {
    if (integral)
      for (double v : d.response) d.y.push_back(static_cast<int>(v));
    return d;
  }
  d.response.clear();
  const std::set<std::string> distinct(labels.begin(), labels.end());
  d.class_names.assign(distinct.begin(), distinct.end());
  for (const auto& s : labels)
    d.y.push_back(1 + static_cast<int>(std::lower_bound(d.class_names.begin(), d.class_names.end(), s) -
                                       d.class_names.begin()));
  return d;
}

Dataset load_csv(const std::filesystem::path& path, const LabelSpec& spec) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return read_csv(in, spec, path.string());
}

void write_csv(std::ostream& os, const Dataset& d) {
  for (std::size_t j = 0; j < d.names.size(); ++j) os << (j ? "," : "") << csv_field(d.names[j]);
  if (d.labelled()) os << ',' << csv_field(d.label_name);
  os << '\n';
  for (std::size_t i = 0; i < d.rows(); ++i) {
    for (std::size_t j = 0; j < d.cols(); ++j) os << (j ? "," : "") << fmt17(d.X(i, j));
    if (d.labelled()) {
      os << ',';
      if (!d.class_names.empty())
        os << csv_field(d.class_names[static_cast<std::size_t>(d.y[i] - 1)]);
      else if (!d.y.empty())
        os << d.y[i];
      else
        os << fmt17(d.response[i]);
    }
    os << '\n';
  }
}

void save_csv(const std::filesystem::path& path, const Dataset& d) {
  write_atomic(path, [&](std::ostream& os) { write_csv(os, d); });
}

void write_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  try {
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw DataError("cannot write " + tmp.string());
      out.imbue(std::locale::classic());
      body(out);
      out.flush();
      if (!out) throw DataError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove(tmp, ec);
    throw;
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::regression: return "regression";
    case ModelKind::binary: return "binary";
    case ModelKind::multinomial: return "multinomial";
  }
  return "?";
}

const BartConfig& ModelArtifact::config() const {
  return std::visit([](const auto& d) -> const BartConfig& { return d.config; }, draws);
}

const CutpointGrid& ModelArtifact::grid() const {
  return std::visit([](const auto& d) -> const CutpointGrid& { return d.grid; }, draws);
}

VarcountMatrix ModelArtifact::varcount() const {
  if (const auto* c = std::get_if<ClassifierDraws>(&draws)) return combined_varcount(*c);
  if (const auto* r = std::get_if<RegressionDraws>(&draws)) return r->chain.varcount;
  return std::get<BinaryDraws>(draws).chain.varcount;
}

// ---- model JSON ----

namespace {

ojson config_json(const BartConfig& c) {
  return {{"num_trees", c.num_trees},   {"k", c.k},
          {"power", c.power},           {"base", c.base},
          {"ndpost", c.ndpost},         {"nskip", c.nskip},
          {"sparse", c.sparse},         {"seed", c.seed},
          {"sigma_df", c.sigma_df},     {"sigma_quant", c.sigma_quant},
          {"grid_size", c.grid_size},   {"min_leaf", c.min_leaf},
          {"sparse_a", c.sparse_a},     {"sparse_b", c.sparse_b},
          {"sparse_rho", c.sparse_rho}};
}

// Typed field access with messages that name the field path.
class Fields {
 public:
  Fields(const json& j, std::string path, bool strict) : j_(j), path_(std::move(path)), strict_(strict) {
    if (!j_.is_object()) throw UsageError(path_ + ": expected an object");
  }

  template <class T>
  void get(const char* name, T& out) {
    seen_.insert(name);
    const auto it = j_.find(name);
    if (it == j_.end()) return;
    const std::string where = path_ + "." + name;
    if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw UsageError(where + ": expected true or false");
      out = it->get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (std::is_unsigned_v<T> ? !it->is_number_unsigned() : !it->is_number_integer())
        throw UsageError(where + (std::is_unsigned_v<T> ? ": expected a nonnegative integer" : ": expected an integer"));
      out = it->get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) throw UsageError(where + ": expected a number");
      out = it->get<T>();
    } else {
      if (!it->is_array() || it->empty()) throw UsageError(where + ": expected a non-empty array");
      T vals;
      for (const auto& e : *it) {
        using V = typename T::value_type;
        if constexpr (std::is_integral_v<V>) {
          if (!e.is_number_unsigned()) throw UsageError(where + ": expected nonnegative integers");
        } else {
          if (!e.is_number()) throw UsageError(where + ": expected numbers");
        }
        vals.push_back(e.get<V>());
      }
      out = std::move(vals);
    }
  }

  void finish() const {
    if (!strict_) return;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw UsageError(path_ + "." + it.key() + ": unknown field");
  }

 private:
  const json& j_;
  std::string path_;
  bool strict_;
  std::set<std::string> seen_;
};

BartConfig parse_bart(const json& j, const std::string& path, bool strict) {
  BartConfig c;
  Fields f(j, path, strict);
  f.get("num_trees", c.num_trees);
  f.get("k", c.k);
  f.get("power", c.power);
  f.get("base", c.base);
  f.get("ndpost", c.ndpost);
  f.get("nskip", c.nskip);
  f.get("sparse", c.sparse);
  f.get("seed", c.seed);
  f.get("sigma_df", c.sigma_df);
  f.get("sigma_quant", c.sigma_quant);
  f.get("grid_size", c.grid_size);
  f.get("min_leaf", c.min_leaf);
  f.get("sparse_a", c.sparse_a);
  f.get("sparse_b", c.sparse_b);
  f.get("sparse_rho", c.sparse_rho);
  f.finish();
  try {
    c.validate();
  } catch (const UsageError& e) {
    throw UsageError(path + "." + e.what());
  }
  return c;
}

ojson tree_json(const Tree& t) {
  const TreeRecords rec = serialize_tree(t);
  ojson rows = ojson::array();
  rows.push_back({rec.node_count, nullptr, nullptr, nullptr});
  for (const TreeRecord& r : rec.rows) rows.push_back({r.node, r.var, r.cut, r.leaf});
  return rows;
}

Tree parse_tree_json(const json& rows, const CutpointGrid& grid) {
  if (!rows.is_array() || rows.empty() || !rows[0].is_array() || rows[0].empty())
    throw DataError("model JSON: malformed tree");
  TreeRecords rec;
  rec.node_count = rows[0][0].get<std::size_t>();
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const json& r = rows[k];
    if (!r.is_array() || r.size() != 4) throw DataError("model JSON: tree row must have 4 entries");
    rec.rows.push_back({r[0].get<NodeId>(), r[1].get<int>(), r[2].get<int>(), r[3].get<double>()});
  }
  Tree t = parse_tree(rec);
  t.check_against(grid);
  return t;
}

ojson chain_json(const ChainDraws& c) {
  ojson j;
  ojson draws = ojson::array();
  for (const Ensemble& e : c.ensembles) {
    ojson trees = ojson::array();
    for (const Tree& t : e.trees) trees.push_back(tree_json(t));
    draws.push_back(std::move(trees));
  }
  j["draws"] = std::move(draws);
  j["varcount"] = {{"rows", c.varcount.draws()}, {"cols", c.varcount.vars()}, {"data", c.varcount.data()}};
  if (c.varprob.rows() > 0)
    j["varprob"] = {{"rows", c.varprob.rows()}, {"cols", c.varprob.cols()}, {"data", c.varprob.data()}};
  if (!c.theta.empty()) j["theta"] = c.theta;
  return j;
}

ChainDraws parse_chain(const json& j, const CutpointGrid& grid) {
  ChainDraws c;
  for (const json& d : j.at("draws")) {
    Ensemble e;
    for (const json& t : d) e.trees.push_back(parse_tree_json(t, grid));
    c.ensembles.push_back(std::move(e));
  }
  const json& vc = j.at("varcount");
  const auto rows = vc.at("rows").get<std::size_t>(), cols = vc.at("cols").get<std::size_t>();
  const auto data = vc.at("data").get<std::vector<std::uint32_t>>();
  if (data.size() != rows * cols) throw DataError("model JSON: varcount size mismatch");
  c.varcount = VarcountMatrix(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t k = 0; k < cols; ++k) c.varcount(i, k) = data[i * cols + k];
  if (j.contains("varprob")) {
    const json& vp = j.at("varprob");
    const auto r = vp.at("rows").get<std::size_t>(), cc = vp.at("cols").get<std::size_t>();
    auto vals = vp.at("data").get<std::vector<double>>();
    if (vals.size() != r * cc) throw DataError("model JSON: varprob size mismatch");
    c.varprob = Matrix(r, cc, std::move(vals));
  }
  if (j.contains("theta")) c.theta = j.at("theta").get<std::vector<double>>();
  return c;
}

ojson grid_json(const CutpointGrid& g) {
  ojson cuts = ojson::array(), split = ojson::array();
  for (std::size_t v = 0; v < g.num_vars(); ++v) {
    const auto c = g.cuts(v);
    cuts.push_back(std::vector<double>(c.begin(), c.end()));
    split.push_back(g.splittable(v));
  }
  return {{"cuts", cuts}, {"splittable", split}};
}

CutpointGrid parse_grid(const json& j) {
  auto cuts = j.at("cuts").get<std::vector<std::vector<double>>>();
  auto split = j.at("splittable").get<std::vector<bool>>();
  return CutpointGrid(std::move(cuts), std::move(split));
}

ojson binary_json(const BinaryDraws& b) {
  ojson j;
  j["offset"] = b.offset;
  j["train_size"] = b.train_size;
  j["chain"] = chain_json(b.chain);
  return j;
}

BinaryDraws parse_binary(const json& j, const BartConfig& cfg, const CutpointGrid& grid) {
  BinaryDraws b;
  b.config = cfg;
  b.grid = grid;
  b.offset = j.at("offset").get<double>();
  b.train_size = j.at("train_size").get<std::size_t>();
  b.chain = parse_chain(j.at("chain"), grid);
  return b;
}

void check_draw_count(const ChainDraws& c, const BartConfig& cfg) {
  if (c.size() != cfg.ndpost)
    throw DataError("model JSON: " + std::to_string(c.size()) + " draws stored but config has ndpost = " +
                    std::to_string(cfg.ndpost));
}

}  // namespace

void write_model_json(std::ostream& os, const ModelArtifact& m) {
  ojson j;
  j["format"] = "sbart-model";
  j["version"] = m.version;
  j["kind"] = to_string(m.kind());
  j["config"] = config_json(m.config());
  j["variables"] = m.variables;
  j["label"] = m.label_name;
  j["class_names"] = m.class_names;
  j["grid"] = grid_json(m.grid());
  std::visit(
      [&](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, RegressionDraws>) {
          j["rescale"] = {{"center", d.rescale.center}, {"scale", d.rescale.scale}};
          j["sigma"] = d.sigma;
          j["chain"] = chain_json(d.chain);
        } else if constexpr (std::is_same_v<T, BinaryDraws>) {
          j["stages"] = ojson::array({binary_json(d)});
        } else {
          j["num_classes"] = d.num_classes;
          j["stages"] = ojson::array();
          for (const BinaryDraws& s : d.stages) j["stages"].push_back(binary_json(s));
        }
      },
      m.draws);
  os << j.dump() << '\n';
}

ModelArtifact read_model_json(std::istream& is) {
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw DataError(std::string("model JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("format", "") != "sbart-model") throw DataError("not an sbart model file");
  if (!j.contains("version") || !j["version"].is_number_integer())
    throw DataError("model file has no integer version tag");
  ModelArtifact m;
  m.version = j["version"].get<int>();
  if (m.version != kModelFormatVersion)
    throw DataError("unsupported model format version " + std::to_string(m.version) + " (this build reads " +
                    std::to_string(kModelFormatVersion) + ")");
  try {
    const BartConfig cfg = parse_bart(j.at("config"), "config", true);
    const CutpointGrid grid = parse_grid(j.at("grid"));
    m.variables = j.at("variables").get<std::vector<std::string>>();
    m.label_name = j.at("label").get<std::string>();
    m.class_names = j.at("class_names").get<std::vector<std::string>>();
    if (!m.variables.empty() && m.variables.size() != grid.num_vars())
      throw DataError("model JSON: variable names do not match grid");
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "regression") {
      RegressionDraws r;
      r.config = cfg;
      r.grid = grid;
      r.rescale = {j.at("rescale").at("center").get<double>(), j.at("rescale").at("scale").get<double>()};
      r.sigma = j.at("sigma").get<std::vector<double>>();
      r.chain = parse_chain(j.at("chain"), grid);
      check_draw_count(r.chain, cfg);
      m.draws = std::move(r);
    } else if (kind == "binary") {
      const json& st = j.at("stages");
      if (st.size() != 1) throw DataError("model JSON: binary model needs exactly one stage");
      BinaryDraws b = parse_binary(st[0], cfg, grid);
      check_draw_count(b.chain, cfg);
      m.draws = std::move(b);
    } else if (kind == "multinomial") {
      ClassifierDraws c;
      c.config = cfg;
      c.grid = grid;
      c.num_classes = j.at("num_classes").get<int>();
      for (const json& s : j.at("stages")) {
        c.stages.push_back(parse_binary(s, cfg, grid));
        check_draw_count(c.stages.back().chain, cfg);
      }
      if (static_cast<int>(c.stages.size()) != c.num_classes - 1)
        throw DataError("model JSON: stage count does not match num_classes");
      m.draws = std::move(c);
    } else {
      throw DataError("model JSON: unknown kind '" + kind + "'");
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("model JSON: ") + e.what());
  } catch (const UsageError& e) {
    throw DataError(std::string("model JSON: ") + e.what());
  }
  return m;
}

void save_model(const std::filesystem::path& path, const ModelArtifact& m) {
  write_atomic(path, [&](std::ostream& os) { write_model_json(os, m); });
}

ModelArtifact load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return read_model_json(in);
}

// ---- run config ----

RunConfig parse_config(std::istream& is) {
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw UsageError(std::string("config: not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw UsageError("config: expected a JSON object");
  RunConfig rc;
  for (auto it = j.begin(); it != j.end(); ++it)
    if (it.key() != "bart" && it.key() != "grid" && it.key() != "pipeline")
      throw UsageError("config." + it.key() + ": unknown section");
  if (j.contains("bart")) rc.bart = parse_bart(j["bart"], "config.bart", true);
  rc.grid.base_config = rc.bart;
  if (j.contains("grid")) {
    Fields f(j["grid"], "config.grid", true);
    f.get("num_trees", rc.grid.num_trees);
    f.get("k", rc.grid.k);
    f.get("power", rc.grid.power);
    f.get("base", rc.grid.base);
    f.get("folds", rc.grid.folds);
    f.get("seed", rc.grid.seed);
    f.finish();
  } else {
    rc.grid.seed = rc.bart.seed;
  }
  if (j.contains("pipeline")) {
    Fields f(j["pipeline"], "config.pipeline", true);
    f.get("test_frac", rc.pipeline.test_frac);
    f.get("folds", rc.pipeline.folds);
    f.get("smote", rc.pipeline.smote);
    f.get("smote_k", rc.pipeline.smote_k);
    f.finish();
    if (!(rc.pipeline.test_frac >= 0.0 && rc.pipeline.test_frac < 1.0))
      throw UsageError("config.pipeline.test_frac: must lie in [0, 1)");
    if (rc.pipeline.folds < 2) throw UsageError("config.pipeline.folds: need at least 2 folds");
    if (rc.pipeline.smote_k < 1) throw UsageError("config.pipeline.smote_k: must be >= 1");
  }
  try {
    rc.grid.validate();
  } catch (const UsageError& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  return rc;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open config " + path.string());
  return parse_config(in);
}

void write_bart_config_json(std::ostream& os, const BartConfig& c) { os << config_json(c).dump(2) << '\n'; }

void write_config_json(std::ostream& os, const RunConfig& c) {
  ojson j;
  j["bart"] = config_json(c.bart);
  j["grid"] = {{"num_trees", c.grid.num_trees}, {"k", c.grid.k},         {"power", c.grid.power},
               {"base", c.grid.base},           {"folds", c.grid.folds}, {"seed", c.grid.seed}};
  j["pipeline"] = {{"test_frac", c.pipeline.test_frac},
                   {"folds", c.pipeline.folds},
                   {"smote", c.pipeline.smote},
                   {"smote_k", c.pipeline.smote_k}};
  os << j.dump(2) << '\n';
}

// ---- selection reports ----

namespace {

std::string name_or_index(std::span<const std::string> names, std::size_t j) {
  return j < names.size() ? names[j] : "x" + std::to_string(j + 1);
}

std::string fmt10(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

void write_usage_csv(std::ostream& os, const UsageSummary& us, std::span<const std::string> names,
                     std::size_t limit) {
  os << "variable,index,mean,lower,upper,rank\n";
  const std::size_t n = limit == 0 ? us.ranking.size() : std::min(limit, us.ranking.size());
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t j = us.ranking[r];
    os << csv_field(name_or_index(names, j)) << ',' << j << ',' << fmt10(us.mean[j]) << ','
       << fmt10(us.lower[j]) << ',' << fmt10(us.upper[j]) << ',' << r + 1 << '\n';
  }
}

void write_sparse_csv(std::ostream& os, const SparseSummary& s, std::span<const std::string> names) {
  os << "stage,variable,index,mean_prob,selected\n";
  for (const StageSelection& st : s.stages)
    for (std::size_t j = 0; j < st.mean.size(); ++j) {
      const bool sel = std::find(st.selected.begin(), st.selected.end(), j) != st.selected.end();
      os << st.stage << ',' << csv_field(name_or_index(names, j)) << ',' << j << ',' << fmt10(st.mean[j]) << ','
         << (sel ? 1 : 0) << '\n';
    }
}

void write_selection_json(std::ostream& os, const std::string& method, std::span<const std::size_t> vars,
                          std::span<const std::string> names, double cumulative) {
  ojson j;
  j["method"] = method;
  j["variables"] = ojson::array();
  for (std::size_t v : vars) j["variables"].push_back({{"index", v}, {"name", name_or_index(names, v)}});
  if (std::isfinite(cumulative)) j["cumulative"] = cumulative;
  os << j.dump(2) << '\n';
}

}  // namespace sbart
