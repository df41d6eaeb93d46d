// The three loss augmentations: L1 sparsity over the trainable parameters,
// manifold regularization over pairwise state differences of similar samples,
// and the adaptive (alpha, gamma) controller driven by the val/train ratio.
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include "layerwise/matrix.hpp"
#include "layerwise/rng.hpp"

namespace lw {

enum class SimilarityKind { label, kmeans, perturbation_manifold };

// beta_ij in {0,1}, stored as the ordered pair list (both (i,j) and (j,i)),
// zero diagonal. Every builder here produces a partition, so the group id per
// row is kept alongside for cheap batch restriction.
struct SimilarityMatrix {
  SimilarityKind kind = SimilarityKind::label;
  std::size_t n = 0;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  std::vector<std::uint32_t> group;  // group id per row

  static SimilarityMatrix from_groups(SimilarityKind kind,
                                      std::vector<std::uint32_t> group_ids) {
    SimilarityMatrix s;
    s.kind = kind;
    s.n = group_ids.size();
    s.group = std::move(group_ids);
    std::map<std::uint32_t, std::vector<std::uint32_t>> buckets;
    for (std::uint32_t i = 0; i < s.n; ++i) buckets[s.group[i]].push_back(i);
    for (const auto& [gid, rows] : buckets) {
      (void)gid;
      for (std::uint32_t a : rows)
        for (std::uint32_t b : rows)
          if (a != b) s.pairs.emplace_back(a, b);
    }
    return s;
  }

  // Similarity over a subset of rows, reindexed to the subset.
  SimilarityMatrix restrict_to(const std::vector<std::size_t>& rows) const {
    std::vector<std::uint32_t> sub(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i] >= n) throw std::out_of_range("similarity: row index out of range");
      sub[i] = group[rows[i]];
    }
    return from_groups(kind, std::move(sub));
  }
};

// L1 over a flattened parameter view. Subgradient is sign with 0 at exactly 0,
// so thresholded and zero-initialized entries are not pushed off zero.
inline double sparsity_loss(const Matrix& params) {
  double s = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) s += std::fabs(params.data()[i]);
  return s;
}

inline void sparsity_subgrad_accumulate(const Matrix& params, double alpha, Matrix& grad) {
  detail::check(params.rows() == grad.rows() && params.cols() == grad.cols(),
                "sparsity: shape mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double v = params.data()[i];
    if (v > 0.0)
      grad.data()[i] += alpha;
    else if (v < 0.0)
      grad.data()[i] -= alpha;
  }
}

// (1/2) sum_{i,j} beta_ij ||Y_i - Y_j||^2 over ordered pairs.
inline double manifold_loss(const Matrix& y, const SimilarityMatrix& sim) {
  double loss = 0.0;
  for (const auto& [i, j] : sim.pairs) {
    if (i >= y.rows() || j >= y.rows())
      throw std::out_of_range("manifold_loss: pair index out of range");
    const double* yi = y.row(i);
    const double* yj = y.row(j);
    double d = 0.0;
    for (std::size_t c = 0; c < y.cols(); ++c) {
      const double t = yi[c] - yj[c];
      d += t * t;
    }
    loss += d;
  }
  return 0.5 * loss;
}

// Gradient per row i: 2 * sum_j beta_ij (Y_i - Y_j).
inline Matrix manifold_grad(const Matrix& y, const SimilarityMatrix& sim) {
  Matrix g(y.rows(), y.cols());
  for (const auto& [i, j] : sim.pairs) {
    if (i >= y.rows() || j >= y.rows())
      throw std::out_of_range("manifold_grad: pair index out of range");
    const double* yi = y.row(i);
    const double* yj = y.row(j);
    double* gi = g.row(i);
    for (std::size_t c = 0; c < y.cols(); ++c) gi[c] += 2.0 * (yi[c] - yj[c]);
  }
  return g;
}

template <typename Label>
SimilarityMatrix build_similarity_label(const std::vector<Label>& labels) {
  std::map<Label, std::uint32_t> ids;
  std::vector<std::uint32_t> group(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = ids.try_emplace(labels[i], static_cast<std::uint32_t>(ids.size()));
    group[i] = it->second;
  }
  return SimilarityMatrix::from_groups(SimilarityKind::label, std::move(group));
}

// Lloyd's algorithm, seeded farthest-point initialization, at most 50 sweeps.
inline std::vector<std::uint32_t> kmeans_assign(const Matrix& x, std::size_t k,
                                                RngState& rng) {
  detail::check(x.rows() > 0, "kmeans: empty input");
  detail::check(k >= 1 && k <= x.rows(), "kmeans: bad cluster count");
  const std::size_t m = x.rows(), d = x.cols();

  auto dist2 = [&](const double* a, const double* b) {
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double t = a[c] - b[c];
      s += t * t;
    }
    return s;
  };

  std::vector<std::size_t> centers_idx;
  centers_idx.push_back(rng.uniform_index(m));
  std::vector<double> best(m, 0.0);
  while (centers_idx.size() < k) {
    std::size_t far = 0;
    double far_d = -1.0;
    for (std::size_t i = 0; i < m; ++i) {
      double dmin = dist2(x.row(i), x.row(centers_idx[0]));
      for (std::size_t c = 1; c < centers_idx.size(); ++c)
        dmin = std::min(dmin, dist2(x.row(i), x.row(centers_idx[c])));
      if (dmin > far_d) {
        far_d = dmin;
        far = i;
      }
    }
    centers_idx.push_back(far);
  }

  Matrix centers(k, d);
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t j = 0; j < d; ++j) centers(c, j) = x(centers_idx[c], j);

  std::vector<std::uint32_t> assign(m, 0);
  for (int sweep = 0; sweep < 50; ++sweep) {
    bool changed = false;
    for (std::size_t i = 0; i < m; ++i) {
      std::uint32_t bestc = 0;
      double bestd = dist2(x.row(i), centers.row(0));
      for (std::uint32_t c = 1; c < k; ++c) {
        const double dd = dist2(x.row(i), centers.row(c));
        if (dd < bestd) {
          bestd = dd;
          bestc = c;
        }
      }
      if (assign[i] != bestc) {
        assign[i] = bestc;
        changed = true;
      }
    }
    if (!changed && sweep > 0) break;
    Matrix sums(k, d);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < m; ++i) {
      counts[assign[i]]++;
      for (std::size_t j = 0; j < d; ++j) sums(assign[i], j) += x(i, j);
    }
    for (std::size_t c = 0; c < k; ++c)
      if (counts[c] > 0)
        for (std::size_t j = 0; j < d; ++j) centers(c, j) = sums(c, j) / counts[c];
  }
  return assign;
}

inline SimilarityMatrix build_similarity_kmeans(const Matrix& x, std::size_t k,
                                                RngState& rng) {
  return SimilarityMatrix::from_groups(SimilarityKind::kmeans, kmeans_assign(x, k, rng));
}

// Appendix-E controller: r(e) = val/train error ratio, clamped, rescales the
// initial (alpha0, gamma0) each epoch.
struct AdaptiveRegState {
  double alpha0 = 0.0;
  double gamma0 = 0.0;
  double r_max = 10.0;
  double ratio = 1.0;
  bool warned_zero_train = false;
};

inline std::pair<double, double> adaptive_update(AdaptiveRegState& state, double t_r,
                                                 double t_e) {
  double r;
  if (t_r <= 0.0) {
    r = state.r_max;
    state.warned_zero_train = true;
  } else {
    r = std::clamp(t_e / t_r, 0.0, state.r_max);
  }
  state.ratio = r;
  return {r * state.alpha0, r * state.gamma0};
}

}  // namespace lw
