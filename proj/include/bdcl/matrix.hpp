// matrix.hpp -- dense matrix aliases and shape helpers on top of Eigen
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <string>

#include "bdcl/errors.hpp"

namespace bdcl {

using Index = Eigen::Index;

// Row-major dynamic matrix, templated on scalar. double is the default
// precision throughout; float is the optional fast mode.
template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class S>
bool all_finite(const Mat<S>& m) {
  return m.allFinite();
}

template <class S>
std::string shape_str(const Mat<S>& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

template <class S>
void require_same_shape(const Mat<S>& a, const Mat<S>& b, const char* where) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(where) + ": shape mismatch " +
                         shape_str(a) + " vs " + shape_str(b));
  }
}

}  // namespace bdcl
