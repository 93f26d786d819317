#include "extremodep/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace extremodep {

double positive_stable(double alpha, Rng& rng) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("positive_stable: alpha must be in (0,1]");
  if (alpha == 1.0) return 1.0;
  const double u = std::numbers::pi * rng.uniform();
  const double e = rng.exponential();
  return std::sin(alpha * u) / std::pow(std::sin(u), 1.0 / alpha) *
         std::pow(std::sin((1.0 - alpha) * u) / e, (1.0 - alpha) / alpha);
}

Matrix sample_logistic(int n, int d, double alpha, Rng& rng) {
  if (n < 0 || d < 1) throw std::invalid_argument("sample_logistic: bad dimensions");
  Matrix out(n, Vec(d));
  for (auto& row : out) {
    const double s = positive_stable(alpha, rng);
    for (auto& z : row) z = std::pow(s / rng.exponential(), alpha);
  }
  return out;
}

Matrix sample_planted_logistic(int n, const std::vector<int>& group_sizes, double alpha, Rng& rng) {
  int d = 0;
  for (int g : group_sizes) {
    if (g < 1) throw std::invalid_argument("sample_planted_logistic: empty group");
    d += g;
  }
  Matrix out(n, Vec(d));
  for (auto& row : out) {
    int col = 0;
    for (int g : group_sizes) {
      const double s = positive_stable(alpha, rng);
      for (int j = 0; j < g; ++j) row[col++] = std::pow(s / rng.exponential(), alpha);
    }
  }
  return out;
}

}  // namespace extremodep
