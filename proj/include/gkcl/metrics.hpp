#pragma once

#include <vector>

#include "gkcl/errors.hpp"

namespace gkcl {

// Lower-triangular per-task accuracies: row t (appended after training task
// t) holds a_{t,1} .. a_{t,t}. Task indices are 1-based.
class AccuracyMatrix {
 public:
  int tasks() const { return int(rows_.size()); }
  void append_row(std::vector<double> row);
  double at(int t, int i) const;
  const std::vector<std::vector<double>>& rows() const { return rows_; }

 private:
  std::vector<std::vector<double>> rows_;
};

// A_t: mean accuracy over tasks 1..t after training task t.
double average_accuracy(const AccuracyMatrix& m, int t);

// F: mean over i < T of max_{t in i..T-1} (a_{t,i} - a_{T,i}).
double average_forgetting(const AccuracyMatrix& m);

}  // namespace gkcl
