#pragma once

#include <vector>

namespace qprobe {

struct PolyFit {
  std::vector<double> coefficients;  // c0 + c1 x + c2 x^2 + ...
  double residual = 0;               // rms of fit residuals
  double condition = 0;              // condition number of the Vandermonde system
};

// Unweighted least-squares polynomial fit.
PolyFit polyfit(const std::vector<double>& x, const std::vector<double>& y, int order);

double polyval(const std::vector<double>& coefficients, double x);

}  // namespace qprobe
