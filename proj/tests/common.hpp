#pragma once

#include <initializer_list>

#include "csub/chart.hpp"

namespace testing {

inline csub::Vec vec(std::initializer_list<double> values) {
  csub::Vec v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

inline csub::Vec Vec2(double a, double b) { return vec({a, b}); }

}  // namespace testing
