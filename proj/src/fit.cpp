#include "qprobe/fit.hpp"

#include <Eigen/Dense>
#include <stdexcept>

namespace qprobe {

PolyFit polyfit(const std::vector<double>& x, const std::vector<double>& y, int order) {
  if (x.size() != y.size()) throw std::invalid_argument("polyfit: size mismatch");
  const int n = static_cast<int>(x.size());
  if (n < order + 1) throw std::invalid_argument("polyfit: not enough points for requested order");
  Eigen::MatrixXd a(n, order + 1);
  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i) {
    double p = 1;
    for (int k = 0; k <= order; ++k) {
      a(i, k) = p;
      p *= x[static_cast<std::size_t>(i)];
    }
    b(i) = y[static_cast<std::size_t>(i)];
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  PolyFit fit;
  fit.condition = svd.singularValues()(0) / svd.singularValues()(svd.singularValues().size() - 1);
  Eigen::VectorXd c = svd.solve(b);
  fit.coefficients.assign(c.data(), c.data() + c.size());
  fit.residual = std::sqrt((a * c - b).squaredNorm() / n);
  return fit;
}

double polyval(const std::vector<double>& coefficients, double x) {
  double v = 0;
  for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) v = v * x + *it;
  return v;
}

}  // namespace qprobe
