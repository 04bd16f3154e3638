#include "internal.hpp"

#include "gdid/errors.hpp"

#include <cmath>
#include <limits>

namespace gdid {

Vector nnls(const Matrix& a, const Vector& b, int max_iterations) {
  const auto n = a.cols();
  if (a.rows() != b.size()) throw Error(ErrorCode::InvalidArgument, "nnls: dimension mismatch");
  if (max_iterations <= 0) max_iterations = static_cast<int>(3 * n) + 30;
  Vector x = Vector::Zero(n);
  std::vector<char> passive(static_cast<std::size_t>(n), 0);
  const double tol = 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff()) * std::max(1.0, b.cwiseAbs().maxCoeff()) *
                     static_cast<double>(std::max<Eigen::Index>(a.rows(), 1));

  auto solve_passive = [&](Vector& s) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < n; ++j)
      if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
    Matrix ap(a.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) ap.col(static_cast<Eigen::Index>(k)) = a.col(idx[k]);
    const Vector sp = ap.colPivHouseholderQr().solve(b);
    s = Vector::Zero(n);
    for (std::size_t k = 0; k < idx.size(); ++k) s[idx[k]] = sp[static_cast<Eigen::Index>(k)];
  };

  Vector w = a.transpose() * (b - a * x);
  for (int outer = 0; outer < max_iterations; ++outer) {
    Eigen::Index best = -1;
    double wmax = tol;
    for (Eigen::Index j = 0; j < n; ++j)
      if (!passive[static_cast<std::size_t>(j)] && w[j] > wmax) {
        wmax = w[j];
        best = j;
      }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = 1;

    Vector s;
    for (int inner = 0; inner < max_iterations; ++inner) {
      solve_passive(s);
      double alpha = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[static_cast<std::size_t>(j)] && s[j] <= 0.0) alpha = std::min(alpha, x[j] / (x[j] - s[j]));
      if (!std::isfinite(alpha)) break;
      x += alpha * (s - x);
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[static_cast<std::size_t>(j)] && x[j] <= 1e-15) {
          passive[static_cast<std::size_t>(j)] = 0;
          x[j] = 0.0;
        }
    }
    x = s;
    for (Eigen::Index j = 0; j < n; ++j)
      if (!passive[static_cast<std::size_t>(j)]) x[j] = 0.0;
    w = a.transpose() * (b - a * x);
  }
  return x.cwiseMax(0.0);
}

}  // namespace gdid
