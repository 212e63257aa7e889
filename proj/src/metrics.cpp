#include "gkcl/metrics.hpp"

#include <algorithm>
#include <string>

namespace gkcl {

void AccuracyMatrix::append_row(std::vector<double> row) {
  if (int(row.size()) != tasks() + 1)
    throw DimensionError("AccuracyMatrix: row " + std::to_string(tasks() + 1) + " must have " +
                         std::to_string(tasks() + 1) + " entries");
  for (double v : row)
    if (!(v >= 0.0 && v <= 1.0)) throw ParameterError("AccuracyMatrix: accuracy outside [0,1]");
  rows_.push_back(std::move(row));
}

double AccuracyMatrix::at(int t, int i) const {
  if (t < 1 || t > tasks() || i < 1 || i > t)
    throw ParameterError("AccuracyMatrix: index (" + std::to_string(t) + "," +
                         std::to_string(i) + ") out of range");
  return rows_[t - 1][i - 1];
}

double average_accuracy(const AccuracyMatrix& m, int t) {
  if (t < 1 || t > m.tasks()) throw ParameterError("average_accuracy: t out of range");
  double s = 0.0;
  for (int i = 1; i <= t; ++i) s += m.at(t, i);
  return s / double(t);
}

double average_forgetting(const AccuracyMatrix& m) {
  const int T = m.tasks();
  if (T < 2) throw MetricError("average_forgetting: undefined for T < 2");
  double s = 0.0;
  for (int i = 1; i <= T - 1; ++i) {
    double best = m.at(i, i);
    for (int t = i; t <= T - 1; ++t) best = std::max(best, m.at(t, i));
    s += best - m.at(T, i);
  }
  return s / double(T - 1);
}

}  // namespace gkcl
