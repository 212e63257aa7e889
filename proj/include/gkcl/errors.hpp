#pragma once

#include <stdexcept>
#include <string>

namespace gkcl {

// Shape disagreement between operands.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Argument outside its documented range (dropout rate, temperature, ...).
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// An operation produced or was given a NaN/Inf where finiteness is required.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// log of a non-positive value and similar domain violations.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Cholesky hit a non-positive pivot; `pivot` is the failing diagonal index.
struct FactorizationError : std::runtime_error {
  int pivot;
  FactorizationError(int pivot_index, const std::string& msg)
      : std::runtime_error(msg), pivot(pivot_index) {}
};

// Gram matrix not SPD even after the permitted jitter.
struct KernelDegeneracyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Backward sweep found a cycle in the node graph.
struct GraphError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Decode/generate asked for a class or task with no registered gate/prior.
struct ContextError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Training protocol violation (re-training a task, evaluating unknown task).
struct ProtocolError : std::logic_error {
  using std::logic_error::logic_error;
};

// Bad key or value in a run configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Metric undefined for the given matrix (forgetting needs T >= 2).
struct MetricError : std::logic_error {
  using std::logic_error::logic_error;
};

// Malformed input file (IDX, checkpoint, CSV).
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace gkcl
