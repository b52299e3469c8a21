#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sbart/config.hpp"
#include "sbart/cvtune.hpp"
#include "sbart/draws.hpp"
#include "sbart/matrix.hpp"
#include "sbart/varselect.hpp"

namespace sbart {

// Which column carries the response. At most one of label_col and
// adulteration_col may be set; with neither, the dataset is unlabelled.
struct LabelSpec {
  std::string label_col;
  std::string adulteration_col;     // raw percentages, aggregated to classes 1..3
  std::vector<std::string> ignore;  // non-numeric columns to drop (sample ids)
};

struct Dataset {
  Matrix X;
  std::vector<std::string> names;        // predictor column names, verbatim
  std::string label_name;                // empty when unlabelled
  std::vector<int> y;                    // integer labels (empty if unlabelled or non-integer)
  std::vector<double> response;          // numeric value of the label column, if numeric
  std::vector<std::string> class_names;  // text labels mapped to 1..K in sorted order
  std::string source;
  std::string checksum;                  // FNV-1a 64 of the file bytes, hex

  std::size_t rows() const { return X.rows(); }
  std::size_t cols() const { return X.cols(); }
  bool labelled() const { return !label_name.empty(); }
  std::map<int, std::size_t> histogram() const;
  Dataset select_vars(std::span<const std::size_t> vars) const;
  Dataset select_rows(std::span<const std::size_t> rows) const;
  // Index of a predictor by name; throws UsageError.
  std::size_t var_index(const std::string& name) const;
};

// Errors name the 1-based data row and the column.
Dataset read_csv(std::istream& is, const LabelSpec& spec, const std::string& source = "<stream>");
Dataset load_csv(const std::filesystem::path& path, const LabelSpec& spec);
// Values are written with 17 significant digits in the C locale.
void write_csv(std::ostream& os, const Dataset& d);
void save_csv(const std::filesystem::path& path, const Dataset& d);

// Writes through a temporary file in the same directory and renames it over
// `path`, so an interrupted run never leaves a partial file.
void write_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body);
std::string read_file(const std::filesystem::path& path);

enum class ModelKind { regression, binary, multinomial };
const char* to_string(ModelKind k);

inline constexpr int kModelFormatVersion = 1;

struct ModelArtifact {
  int version = kModelFormatVersion;
  std::variant<RegressionDraws, BinaryDraws, ClassifierDraws> draws;
  std::vector<std::string> variables;
  std::string label_name;
  std::vector<std::string> class_names;

  ModelKind kind() const { return static_cast<ModelKind>(draws.index()); }
  const BartConfig& config() const;
  const CutpointGrid& grid() const;
  // Varcount summed over probit stages (the only stage for regression/binary).
  VarcountMatrix varcount() const;
  friend bool operator==(const ModelArtifact&, const ModelArtifact&) = default;
};

void write_model_json(std::ostream& os, const ModelArtifact& m);
ModelArtifact read_model_json(std::istream& is);
void save_model(const std::filesystem::path& path, const ModelArtifact& m);
ModelArtifact load_model(const std::filesystem::path& path);

// Run settings outside the sampler itself.
struct PipelineConfig {
  double test_frac = 0.3;
  int folds = 5;
  bool smote = false;
  std::size_t smote_k = 5;
  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

// JSON config: {"bart": {...BartConfig fields}, "grid": {...}, "pipeline": {...}}.
// Every section and field is optional; unknown fields and wrong types are
// rejected with a message naming the field.
struct RunConfig {
  BartConfig bart;
  Grid grid;
  PipelineConfig pipeline;
};

RunConfig parse_config(std::istream& is);
RunConfig load_config(const std::filesystem::path& path);
void write_config_json(std::ostream& os, const RunConfig& c);
void write_bart_config_json(std::ostream& os, const BartConfig& c);

// variable,index,mean,lower,upper,rank
void write_usage_csv(std::ostream& os, const UsageSummary& us, std::span<const std::string> names,
                     std::size_t limit = 0);
// stage,variable,index,mean_prob,selected
void write_sparse_csv(std::ostream& os, const SparseSummary& s, std::span<const std::string> names);
void write_selection_json(std::ostream& os, const std::string& method, std::span<const std::size_t> vars,
                          std::span<const std::string> names, double cumulative);

}  // namespace sbart
