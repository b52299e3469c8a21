#include "sbart/interaction.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <istream>
#include <ostream>

#include <json.hpp>

namespace sbart {

namespace {

void count_tree(const Tree& t, std::size_t p, std::uint64_t* counts) {
  for (std::size_t k = 0; k < t.size(); ++k) {
    const TreeNode& parent = t.nodes()[k];
    if (parent.is_leaf()) continue;
    if (static_cast<std::size_t>(parent.var) >= p) throw StructureError(parent.id, "split variable out of range");
    for (int c : {t.left(k), t.right(k)}) {
      const TreeNode& child = t.nodes()[c];
      if (child.is_leaf()) continue;
      if (static_cast<std::size_t>(child.var) >= p) throw StructureError(child.id, "split variable out of range");
      const std::size_t a = parent.var, b = child.var;
      ++counts[a * p + b];
      if (a != b) ++counts[b * p + a];
    }
  }
}

std::string default_name(std::size_t j) { return "x" + std::to_string(j + 1); }

std::string name_of(std::span<const std::string> names, std::size_t j) {
  return j < names.size() ? names[j] : default_name(j);
}

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + '"';
}

}  // namespace

double round_sig6(double v) { return std::stod(fmt6(v)); }

namespace kernels {

std::vector<std::uint64_t> pair_counts_serial(std::span<const Ensemble> draws, std::size_t num_vars) {
  std::vector<std::uint64_t> counts(num_vars * num_vars, 0);
  for (const Ensemble& e : draws)
    for (const Tree& t : e.trees) count_tree(t, num_vars, counts.data());
  return counts;
}

std::vector<std::uint64_t> pair_counts_omp(std::span<const Ensemble> draws, std::size_t num_vars) {
  const std::size_t pp = num_vars * num_vars;
  std::vector<std::uint64_t> counts(pp, 0);
  std::exception_ptr error;
#pragma omp parallel
  {
    std::vector<std::uint64_t> local(pp, 0);
#pragma omp for schedule(dynamic, 16) nowait
    for (std::int64_t d = 0; d < static_cast<std::int64_t>(draws.size()); ++d) {
      try {
        for (const Tree& t : draws[d].trees) count_tree(t, num_vars, local.data());
      } catch (...) {
#pragma omp critical(sbart_pair_error)
        if (!error) error = std::current_exception();
      }
    }
    // Integer addition is associative, so merge order does not affect the result.
#pragma omp critical(sbart_pair_merge)
    for (std::size_t k = 0; k < pp; ++k) counts[k] += local[k];
  }
  if (error) std::rethrow_exception(error);
  return counts;
}

}  // namespace kernels

InteractionMatrix co_occurrence(std::span<const Ensemble> draws, const CutpointGrid& grid) {
  InteractionMatrix m;
  m.num_vars = grid.num_vars();
  const std::size_t p = m.num_vars;
#ifdef _OPENMP
  m.counts = kernels::pair_counts_omp(draws, p);
#else
  m.counts = kernels::pair_counts_serial(draws, p);
#endif
  for (std::size_t a = 0; a < p; ++a) {
    m.self_pairs += m.counts[a * p + a];
    for (std::size_t b = a; b < p; ++b) m.total_pairs += m.counts[a * p + b];
  }
  m.weights = Matrix(p, p);
  if (m.total_pairs > 0) {
    const double total = static_cast<double>(m.total_pairs);
    for (std::size_t k = 0; k < p * p; ++k) m.weights.data()[k] = static_cast<double>(m.counts[k]) / total;
  }
  return m;
}

std::size_t InteractionNetwork::degree(std::size_t var) const {
  std::size_t d = 0;
  for (const auto& e : edges) d += (e.a == var) + (e.b == var);
  return d;
}

InteractionNetwork build_network(const InteractionMatrix& m, double threshold,
                                 std::span<const std::string> names) {
  if (!(threshold >= 0.0)) throw UsageError("edge threshold must be >= 0");
  InteractionNetwork net;
  net.threshold = threshold;
  const std::size_t p = m.num_vars;
  std::vector<bool> used(p, false);
  for (std::size_t a = 0; a < p; ++a)
    for (std::size_t b = a + 1; b < p; ++b) {
      const double w = m.weights(a, b);
      if (w > 0.0 && w >= threshold) {
        net.edges.push_back({a, b, w});
        used[a] = used[b] = true;
      }
    }
  for (std::size_t j = 0; j < p; ++j)
    if (used[j]) {
      net.nodes.push_back(j);
      net.names.push_back(name_of(names, j));
    }
  return net;
}

void write_network_dot(std::ostream& os, const InteractionNetwork& net) {
  auto label = [&](std::size_t var) {
    const auto it = std::find(net.nodes.begin(), net.nodes.end(), var);
    return quoted(net.names[static_cast<std::size_t>(it - net.nodes.begin())]);
  };
  os << "graph interactions {\n";
  for (std::size_t k = 0; k < net.nodes.size(); ++k) os << "  " << quoted(net.names[k]) << ";\n";
  for (const auto& e : net.edges)
    os << "  " << label(e.a) << " -- " << label(e.b) << " [weight=" << fmt6(e.weight)
       << ", penwidth=" << fmt6(1.0 + 10.0 * e.weight) << "];\n";
  os << "}\n";
}

void write_network_json(std::ostream& os, const InteractionNetwork& net) {
  nlohmann::ordered_json j;
  j["directed"] = false;
  j["threshold"] = round_sig6(net.threshold);
  j["nodes"] = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < net.nodes.size(); ++k)
    j["nodes"].push_back({{"id", net.nodes[k]}, {"name", net.names[k]}, {"degree", net.degree(net.nodes[k])}});
  j["links"] = nlohmann::ordered_json::array();
  for (const auto& e : net.edges)
    j["links"].push_back({{"source", e.a}, {"target", e.b}, {"weight", round_sig6(e.weight)}});
  os << j.dump(2) << '\n';
}

InteractionNetwork read_network_json(std::istream& is) {
  InteractionNetwork net;
  try {
    const auto j = nlohmann::json::parse(is);
    net.threshold = j.at("threshold").get<double>();
    for (const auto& n : j.at("nodes")) {
      net.nodes.push_back(n.at("id").get<std::size_t>());
      net.names.push_back(n.at("name").get<std::string>());
    }
    for (const auto& l : j.at("links")) {
      InteractionEdge e{l.at("source").get<std::size_t>(), l.at("target").get<std::size_t>(),
                        l.at("weight").get<double>()};
      if (e.a > e.b) std::swap(e.a, e.b);
      net.edges.push_back(e);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("network JSON: ") + e.what());
  }
  return net;
}

void write_matrix_csv(std::ostream& os, const InteractionMatrix& m, std::span<const std::string> names) {
  const std::size_t p = m.num_vars;
  os << "variable";
  for (std::size_t j = 0; j < p; ++j) os << ',' << name_of(names, j);
  os << '\n';
  for (std::size_t a = 0; a < p; ++a) {
    os << name_of(names, a);
    for (std::size_t b = 0; b < p; ++b) os << ',' << fmt6(m.weights(a, b));
    os << '\n';
  }
}

}  // namespace sbart
