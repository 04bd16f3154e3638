#include "internal.hpp"

#include "gdid/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace gdid {

namespace {

struct Scaling {
  std::vector<Eigen::Index> kept;
  std::vector<double> mean, scale;

  explicit Scaling(const Matrix& x) {
    const double n = static_cast<double>(x.rows());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double m = x.col(j).mean();
      const double sd = std::sqrt((x.col(j).array() - m).square().sum() / n);
      if (sd > 1e-10 * (1.0 + std::abs(m))) {
        kept.push_back(j);
        mean.push_back(m);
        scale.push_back(sd);
      }
    }
  }

  // Row-major copy, one contiguous row per unit.
  std::vector<double> apply(const Matrix& x) const {
    const auto w = kept.size();
    std::vector<double> out(static_cast<std::size_t>(x.rows()) * w);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (std::size_t k = 0; k < w; ++k)
        out[static_cast<std::size_t>(i) * w + k] = (x(i, kept[k]) - mean[k]) / scale[k];
    return out;
  }
};

class KnnModel final : public Model {
 public:
  KnnModel(const Matrix& x, Vector y, int k) : scaling_(x), train_(scaling_.apply(x)), y_(std::move(y)), k_(k) {}

  Vector predict(const Matrix& features) const override {
    const auto w = scaling_.kept.size();
    const auto q = scaling_.apply(features);
    const auto n = static_cast<std::size_t>(y_.size());
    const auto k = static_cast<std::size_t>(k_);
    Vector out(features.rows());
    std::vector<std::pair<double, std::size_t>> dist(n);
    for (Eigen::Index r = 0; r < features.rows(); ++r) {
      const double* a = q.data() + static_cast<std::size_t>(r) * w;
      for (std::size_t i = 0; i < n; ++i) {
        const double* b = train_.data() + i * w;
        double d = 0.0;
        for (std::size_t j = 0; j < w; ++j) d += (a[j] - b[j]) * (a[j] - b[j]);
        dist[i] = {d, i};
      }
      // pair ordering breaks distance ties by training index
      std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k - 1), dist.end());
      double s = 0.0;
      for (std::size_t i = 0; i < k; ++i) s += y_[static_cast<Eigen::Index>(dist[i].second)];
      out[r] = s / static_cast<double>(k);
    }
    return out;
  }

  std::string describe() const override { return "knn(" + std::to_string(k_) + ")"; }

 private:
  Scaling scaling_;
  std::vector<double> train_;
  Vector y_;
  int k_;
};

struct Stump {
  Eigen::Index feature = -1;  // -1: constant update
  double threshold = 0.0;
  double left = 0.0;
  double right = 0.0;
};

class StumpEnsemble final : public Model {
 public:
  StumpEnsemble(double base, std::vector<Stump> stumps, double shrinkage, bool probability, int rounds)
      : base_(base), stumps_(std::move(stumps)), shrinkage_(shrinkage), probability_(probability), rounds_(rounds) {}

  Vector predict(const Matrix& features) const override {
    Vector f = Vector::Constant(features.rows(), base_);
    for (const auto& s : stumps_) {
      if (s.feature < 0) {
        f.array() += shrinkage_ * s.left;
        continue;
      }
      for (Eigen::Index i = 0; i < f.size(); ++i)
        f[i] += shrinkage_ * (features(i, s.feature) <= s.threshold ? s.left : s.right);
    }
    if (probability_) return f.unaryExpr([](double e) { return expit(e); });
    return f;
  }

  std::string describe() const override {
    std::ostringstream s;
    s << "boosted_stumps(" << rounds_ << ", " << shrinkage_ << ")";
    return s.str();
  }

 private:
  double base_;
  std::vector<Stump> stumps_;
  double shrinkage_;
  bool probability_;
  int rounds_;
};

}  // namespace

ModelPtr fit_knn(const Matrix& features, const Vector& targets, int k) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "knn needs k >= 1");
  if (k > targets.size())
    throw Error(ErrorCode::NotEnoughNeighbors,
                "k = " + std::to_string(k) + " exceeds " + std::to_string(targets.size()) + " training units");
  return std::make_shared<const KnnModel>(features, targets, k);
}

// Gradient boosting with depth-one trees. Regression uses squared loss;
// classification uses the logistic loss with Newton leaf values.
ModelPtr fit_boosted_stumps(const Matrix& features, const Vector& targets, int rounds, double shrinkage,
                            bool probability) {
  if (rounds < 1) throw Error(ErrorCode::InvalidArgument, "boosted stumps need rounds >= 1");
  if (!(shrinkage > 0.0 && shrinkage <= 1.0)) throw Error(ErrorCode::InvalidArgument, "shrinkage must lie in (0, 1]");
  const auto n = targets.size();
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "boosted stumps on empty data");
  const auto p = features.cols();
  const Eigen::Index min_leaf = n >= 20 ? 5 : 1;

  std::vector<std::vector<Eigen::Index>> order(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) {
    auto& o = order[static_cast<std::size_t>(j)];
    o.resize(static_cast<std::size_t>(n));
    std::iota(o.begin(), o.end(), Eigen::Index{0});
    std::stable_sort(o.begin(), o.end(), [&](Eigen::Index a, Eigen::Index b) { return features(a, j) < features(b, j); });
  }

  double base;
  if (probability) {
    const double ybar = std::clamp(targets.mean(), 1e-6, 1 - 1e-6);
    base = std::log(ybar / (1 - ybar));
  } else {
    base = targets.mean();
  }
  Vector f = Vector::Constant(n, base);
  Vector g(n), h(n);
  std::vector<Stump> stumps;
  stumps.reserve(static_cast<std::size_t>(rounds));

  for (int round = 0; round < rounds; ++round) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (probability) {
        const double pr = expit(f[i]);
        g[i] = targets[i] - pr;
        h[i] = std::max(pr * (1 - pr), 1e-12);
      } else {
        g[i] = targets[i] - f[i];
        h[i] = 1.0;
      }
    }
    const double gsum = g.sum();
    const double hsum = h.sum();
    double best_gain = gsum * gsum / hsum;
    Stump best;
    best.left = gsum / hsum;
    for (Eigen::Index j = 0; j < p; ++j) {
      const auto& o = order[static_cast<std::size_t>(j)];
      double gl = 0.0, hl = 0.0;
      for (Eigen::Index r = 0; r + 1 < n; ++r) {
        const auto i = o[static_cast<std::size_t>(r)];
        gl += g[i];
        hl += h[i];
        const auto next = o[static_cast<std::size_t>(r) + 1];
        if (r + 1 < min_leaf || n - r - 1 < min_leaf) continue;
        if (features(next, j) <= features(i, j)) continue;
        const double gr = gsum - gl, hr = hsum - hl;
        const double gain = gl * gl / hl + gr * gr / hr;
        if (gain > best_gain + 1e-12 * std::abs(best_gain)) {
          best_gain = gain;
          best.feature = j;
          best.threshold = 0.5 * (features(i, j) + features(next, j));
          best.left = gl / hl;
          best.right = gr / hr;
        }
      }
    }
    if (probability) {
      best.left = std::clamp(best.left, -4.0, 4.0);
      best.right = std::clamp(best.right, -4.0, 4.0);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const double step = best.feature < 0 || features(i, best.feature) <= best.threshold ? best.left : best.right;
      f[i] += shrinkage * step;
    }
    stumps.push_back(best);
  }
  return std::make_shared<const StumpEnsemble>(base, std::move(stumps), shrinkage, probability, rounds);
}

}  // namespace gdid
