#pragma once

#include <stdexcept>
#include <string>

namespace sbart {

// Exit codes used by the command-line tool. Every exception thrown by the
// library maps onto one of these through exit_code().
enum class ExitCode : int { ok = 0, usage = 2, data = 3, numeric = 4 };

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

// Bad arguments, bad configuration values.
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ExitCode::usage, what) {}
};

// Malformed input data: missing cells, non-finite values, unknown labels,
// degenerate class structure, structurally invalid trees on disk.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ExitCode::data, what) {}
};

// A tree whose node set violates the heap / leaf invariants.
class StructureError : public DataError {
 public:
  StructureError(unsigned long long node_id, const std::string& what)
      : DataError("node " + std::to_string(node_id) + ": " + what), node_id_(node_id) {}
  unsigned long long node_id() const noexcept { return node_id_; }

 private:
  unsigned long long node_id_;
};

// Labels that cannot support the requested fit (one class, empty stage).
class DegenerateLabels : public DataError {
 public:
  explicit DegenerateLabels(const std::string& what) : DataError(what) {}
};

// Numerical failure inside a computation (zero variance, rank-0 input,
// probability drift beyond tolerance).
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ExitCode::numeric, what) {}
};

inline int exit_code(const Error& e) { return static_cast<int>(e.code()); }

}  // namespace sbart
