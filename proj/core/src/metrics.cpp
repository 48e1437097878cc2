#include "twinreg/metrics.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace twinreg {

double rmse(const Vector& predictions, const Vector& targets) {
  if (predictions.size() != targets.size()) {
    throw std::invalid_argument("rmse: length mismatch (" + std::to_string(predictions.size()) +
                                " vs " + std::to_string(targets.size()) + ")");
  }
  if (predictions.size() == 0) throw std::invalid_argument("rmse: empty input");
  return std::sqrt((predictions - targets).squaredNorm() / static_cast<double>(predictions.size()));
}

double mean(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("mean: empty input");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double sample_stddev(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

double standard_error(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("standard_error: empty input");
  return sample_stddev(values) / std::sqrt(static_cast<double>(values.size()));
}

}  // namespace twinreg
