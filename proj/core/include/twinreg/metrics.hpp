#pragma once

#include <span>
#include <vector>

#include "twinreg/data.hpp"

namespace twinreg {

/// sqrt(mean((p - t)^2)). Throws std::invalid_argument on length mismatch or empty input.
double rmse(const Vector& predictions, const Vector& targets);

double mean(std::span<const double> values);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double sample_stddev(std::span<const double> values);
/// sample_stddev / sqrt(n).
double standard_error(std::span<const double> values);

}  // namespace twinreg
