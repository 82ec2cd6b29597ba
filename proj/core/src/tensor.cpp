#include "metarl/tensor.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <sstream>

namespace metarl {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double Tensor::sum() const {
  double s = 0.0;
  for (double v : data_) s += v;
  return s;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << 'x';
    os << shape_[i];
  }
  os << ']';
  return os.str();
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul inner extents differ: lhs cols " + std::to_string(a.cols()) +
                     " vs rhs rows " + std::to_string(b.rows()));
  }
  Tensor out({a.rows(), b.cols()});
  Eigen::Map<const EMat> ma(a.data(), static_cast<Eigen::Index>(a.rows()),
                            static_cast<Eigen::Index>(a.cols()));
  Eigen::Map<const EMat> mb(b.data(), static_cast<Eigen::Index>(b.rows()),
                            static_cast<Eigen::Index>(b.cols()));
  Eigen::Map<EMat> mc(out.data(), static_cast<Eigen::Index>(out.rows()),
                      static_cast<Eigen::Index>(out.cols()));
  mc.noalias() = ma * mb;
  return out;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": shapes differ " + a.shape_str() + " vs " +
                     b.shape_str());
  }
}

}  // namespace metarl
