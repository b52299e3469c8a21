#pragma once

#include <cstdint>
#include <vector>

#include "sbart/config.hpp"
#include "sbart/matrix.hpp"
#include "sbart/tree.hpp"

namespace sbart {

// Per-draw split counts: entry (i, j) is the number of internal nodes, over
// all trees of draw i, that split on predictor j.
class VarcountMatrix {
 public:
  VarcountMatrix() = default;
  VarcountMatrix(std::size_t draws, std::size_t vars) : draws_(draws), vars_(vars), counts_(draws * vars, 0) {}

  std::size_t draws() const noexcept { return draws_; }
  std::size_t vars() const noexcept { return vars_; }
  std::uint32_t operator()(std::size_t i, std::size_t j) const { return counts_[i * vars_ + j]; }
  std::uint32_t& operator()(std::size_t i, std::size_t j) { return counts_[i * vars_ + j]; }
  const std::vector<std::uint32_t>& data() const noexcept { return counts_; }

  void append_row(const std::vector<std::uint32_t>& row) {
    if (draws_ == 0 && counts_.empty()) vars_ = row.size();
    if (row.size() != vars_) throw UsageError("varcount row has wrong width");
    counts_.insert(counts_.end(), row.begin(), row.end());
    ++draws_;
  }

  friend bool operator==(const VarcountMatrix&, const VarcountMatrix&) = default;

 private:
  std::size_t draws_ = 0;
  std::size_t vars_ = 0;
  std::vector<std::uint32_t> counts_;
};

// Retained draws of one chain (regression or one probit stage).
struct ChainDraws {
  std::vector<Ensemble> ensembles;  // one per retained draw
  VarcountMatrix varcount;
  Matrix varprob;                   // draws x p split-variable probabilities; empty unless sparse
  std::vector<double> theta;        // sparse concentration per draw; empty unless sparse

  std::size_t size() const noexcept { return ensembles.size(); }
  friend bool operator==(const ChainDraws&, const ChainDraws&) = default;
};

// Response y is mapped to (y - center) / scale, which lies in [-0.5, 0.5].
struct Rescale {
  double center = 0.0;
  double scale = 1.0;
  friend bool operator==(const Rescale&, const Rescale&) = default;
};

struct RegressionDraws {
  BartConfig config;
  CutpointGrid grid;
  Rescale rescale;
  ChainDraws chain;
  std::vector<double> sigma;  // per retained draw, response units
  friend bool operator==(const RegressionDraws&, const RegressionDraws&) = default;
};

// P(y = 1 | x) = Phi(offset + sum of trees).
struct BinaryDraws {
  BartConfig config;
  CutpointGrid grid;
  double offset = 0.0;
  ChainDraws chain;
  std::size_t train_size = 0;  // observations the stage was fitted on
  friend bool operator==(const BinaryDraws&, const BinaryDraws&) = default;
};

// Stacked conditional probit: stage h (1-based) models P(y = h | y >= h) on
// the observations whose label is at least h. The last class has no stage.
struct ClassifierDraws {
  BartConfig config;
  CutpointGrid grid;
  int num_classes = 0;
  std::vector<BinaryDraws> stages;  // num_classes - 1 entries
  friend bool operator==(const ClassifierDraws&, const ClassifierDraws&) = default;
};

}  // namespace sbart
