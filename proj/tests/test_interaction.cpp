#include <doctest.h>

#include <numeric>
#include <sstream>

#include "oracles.hpp"
#include "sbart/error.hpp"
#include "sbart/interaction.hpp"

using namespace sbart;

namespace {

CutpointGrid unit_grid(std::size_t p) {
  Matrix X(2, p);
  for (std::size_t j = 0; j < p; ++j) X(1, j) = 1.0;
  return CutpointGrid::build(X);
}

// Root splits on a, its left child on b: exactly one pair {a, b}.
Tree pair_tree(int a, int b) {
  return Tree({{1, a, 10, 0.0}, {2, b, 20, 0.0}, {3, kLeaf, kLeaf, 0.1}, {4, kLeaf, kLeaf, 0.2}, {5, kLeaf, kLeaf, 0.3}});
}

}  // namespace

TEST_CASE("depth-two example tree gives a single pair") {
  const Tree t = parse_tree({5, {{1, 2, 19, -0.096}, {2, 1, 45, 0.0982}, {3, 0, 0, 0.360}, {4, 0, 0, 0.206}, {5, 0, 0, -0.257}}});
  const std::vector<Ensemble> draws{{{t}}};
  const auto m = co_occurrence(draws, unit_grid(3));
  CHECK(m.total_pairs == 1);
  CHECK(m.self_pairs == 0);
  CHECK(m.weights(1, 2) == 1.0);
  CHECK(m.weights(2, 1) == 1.0);
  const auto net = build_network(m);
  REQUIRE(net.edges.size() == 1);
  CHECK(net.edges[0] == InteractionEdge{1, 2, 1.0});
  CHECK(net.names == std::vector<std::string>{"x2", "x3"});
}

TEST_CASE("stumps and single leaves have no interactions") {
  const Tree stump({{1, 0, 5, 0.0}, {2, kLeaf, kLeaf, 1.0}, {3, kLeaf, kLeaf, 2.0}});
  const std::vector<Ensemble> draws{{{stump, Tree(0.5), stump}}, {{Tree(1.0)}}};
  const auto m = co_occurrence(draws, unit_grid(4));
  CHECK(m.empty());
  for (double w : m.weights.data()) CHECK(w == 0.0);
  const auto net = build_network(m, 0.0);
  CHECK(net.edges.empty());
  CHECK(net.nodes.empty());
  std::ostringstream dot;
  write_network_dot(dot, net);
  CHECK(dot.str() == "graph interactions {\n}\n");
}

TEST_CASE("pair counts match the path-walking oracle") {
  Rng rng(21);
  const std::size_t p = 6;
  const auto g = unit_grid(p);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<Ensemble> draws(5);
    std::map<std::pair<int, int>, std::uint64_t> expected;
    for (auto& e : draws)
      for (int k = 0; k < 4; ++k) {
        e.trees.push_back(oracle::random_tree(rng, g, 5));
        for (const auto& [pair, c] : oracle::path_pairs(e.trees.back())) expected[pair] += c;
      }
    const auto m = co_occurrence(draws, g);
    std::uint64_t total = 0;
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t b = 0; b < p; ++b) {
        const auto it = expected.find({static_cast<int>(std::min(a, b)), static_cast<int>(std::max(a, b))});
        REQUIRE(m.count(a, b) == (it == expected.end() ? 0 : it->second));
        REQUIRE(m.weights(a, b) == m.weights(b, a));
      }
    for (const auto& [pair, c] : expected) total += c;
    REQUIRE(m.total_pairs == total);
    if (total > 0) {
      double mass = 0;
      for (std::size_t a = 0; a < p; ++a)
        for (std::size_t b = a; b < p; ++b) mass += m.weights(a, b);
      REQUIRE(std::abs(mass - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("three-variable triangle at the default threshold") {
  std::vector<Ensemble> draws(1);
  for (int k = 0; k < 286; ++k) draws[0].trees.push_back(pair_tree(0, 1));
  for (int k = 0; k < 332; ++k) draws[0].trees.push_back(pair_tree(0, 2));
  for (int k = 0; k < 382; ++k) draws[0].trees.push_back(pair_tree(1, 2));
  const auto m = co_occurrence(draws, unit_grid(5));
  const auto net = build_network(m, 0.01);
  REQUIRE(net.edges.size() == 3);
  CHECK(net.edges[0] == InteractionEdge{0, 1, 0.286});
  CHECK(net.edges[1] == InteractionEdge{0, 2, 0.332});
  CHECK(net.edges[2] == InteractionEdge{1, 2, 0.382});
  CHECK(net.nodes == std::vector<std::size_t>{0, 1, 2});
  for (std::size_t v : {0, 1, 2}) CHECK(net.degree(v) == 2);

  CHECK(build_network(m, 0.383).edges.empty());
  CHECK(build_network(m, 0.0).edges.size() == 3);
  CHECK(build_network(m, 0.3).edges.size() == 2);
  CHECK_THROWS_AS(build_network(m, -0.1), UsageError);
}

TEST_CASE("self pairs are counted but never become edges") {
  std::vector<Ensemble> draws{{{pair_tree(3, 3), pair_tree(0, 3)}}};
  const auto m = co_occurrence(draws, unit_grid(4));
  CHECK(m.total_pairs == 2);
  CHECK(m.self_pairs == 1);
  CHECK(m.weights(3, 3) == 0.5);
  const auto net = build_network(m, 0.0);
  REQUIRE(net.edges.size() == 1);
  CHECK(net.edges[0] == InteractionEdge{0, 3, 0.5});
}

TEST_CASE("edge count is monotone in the threshold") {
  Rng rng(22);
  const auto g = unit_grid(8);
  std::vector<Ensemble> draws(20);
  for (auto& e : draws)
    for (int k = 0; k < 10; ++k) e.trees.push_back(oracle::random_tree(rng, g, 4));
  const auto m = co_occurrence(draws, g);
  std::size_t nonzero = 0;
  for (std::size_t a = 0; a < 8; ++a)
    for (std::size_t b = a + 1; b < 8; ++b) nonzero += m.count(a, b) > 0;
  CHECK(build_network(m, 0.0).edges.size() == nonzero);
  std::size_t prev = nonzero;
  for (double t = 0.0; t <= 0.2; t += 0.005) {
    const auto n = build_network(m, t).edges.size();
    CHECK(n <= prev);
    prev = n;
  }
}

TEST_CASE("network exports") {
  std::vector<Ensemble> draws{{{pair_tree(0, 1), pair_tree(0, 1), pair_tree(1, 2)}}};
  const auto m = co_occurrence(draws, unit_grid(3));
  const std::vector<std::string> names{"w1", "w\"2", "w3"};
  const auto net = build_network(m, 0.01, names);

  std::ostringstream dot;
  write_network_dot(dot, net);
  CHECK(dot.str() ==
        "graph interactions {\n"
        "  \"w1\";\n  \"w\\\"2\";\n  \"w3\";\n"
        "  \"w1\" -- \"w\\\"2\" [weight=0.666667, penwidth=7.66667];\n"
        "  \"w\\\"2\" -- \"w3\" [weight=0.333333, penwidth=4.33333];\n"
        "}\n");

  std::stringstream js;
  write_network_json(js, net);
  const auto back = read_network_json(js);
  CHECK(back.nodes == net.nodes);
  CHECK(back.names == net.names);
  REQUIRE(back.edges.size() == 2);
  CHECK(back.edges[0].weight == round_sig6(2.0 / 3.0));
  CHECK(back.threshold == 0.01);

  std::istringstream bad("{\"nodes\": []}");
  CHECK_THROWS_AS(read_network_json(bad), DataError);

  std::ostringstream csv;
  write_matrix_csv(csv, m, names);
  CHECK(csv.str().substr(0, csv.str().find('\n')) == "variable,w1,w\"2,w3");
}

TEST_CASE("split variable outside the grid is reported") {
  std::vector<Ensemble> draws{{{pair_tree(0, 7)}}};
  CHECK_THROWS_AS(co_occurrence(draws, unit_grid(3)), StructureError);
}
