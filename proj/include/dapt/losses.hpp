#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "dapt/tensor.hpp"
#include "dapt/tokenizer.hpp"

namespace dapt {

namespace detail {

template <class S>
S stable_sigmoid(S z) {
  if (z >= S(0)) return S(1) / (S(1) + std::exp(-z));
  const S e = std::exp(z);
  return e / (S(1) + e);
}

}  // namespace detail

// Mean masked-token cross entropy over rows of gathered logits (M x V).
// Optionally accumulates d(loss)/d(logits).
template <class S>
S masked_cross_entropy(const Mat<S>& logits, const std::vector<int32_t>& targets,
                       Mat<S>* d_logits = nullptr) {
  const Eigen::Index m = logits.rows();
  require(m > 0, "cross entropy over zero positions");
  require(static_cast<Eigen::Index>(targets.size()) == m,
          "logits/targets row mismatch");
  if (d_logits) d_logits->resize(m, logits.cols());
  S total = 0;
  for (Eigen::Index r = 0; r < m; ++r) {
    const int32_t target = targets[static_cast<size_t>(r)];
    require(target >= 0 && target < logits.cols(), "target id ", target,
            " outside vocabulary");
    const S zmax = logits.row(r).maxCoeff();
    const S sum_exp = (logits.row(r).array() - zmax).exp().sum();
    const S lse = zmax + std::log(sum_exp);
    total += lse - logits(r, target);
    if (d_logits) {
      d_logits->row(r) =
          ((logits.row(r).array() - zmax).exp() / sum_exp).matrix() / S(m);
      (*d_logits)(r, target) -= S(1) / S(m);
    }
  }
  return total / S(m);
}

// Spec-shaped MLM loss: full (rows x V) logits plus per-position targets with
// MaskedSeq::kIgnoreTarget at unselected positions. The training loop uses
// masked_cross_entropy on gathered rows; both agree exactly.
template <class S>
S mlm_loss(const Mat<S>& logits, const std::vector<int32_t>& targets,
           Mat<S>* d_logits = nullptr) {
  require(static_cast<Eigen::Index>(targets.size()) == logits.rows(),
          "logits/targets row mismatch");
  std::vector<int> rows;
  std::vector<int32_t> gathered;
  for (size_t i = 0; i < targets.size(); ++i)
    if (targets[i] != MaskedSeq::kIgnoreTarget) {
      rows.push_back(static_cast<int>(i));
      gathered.push_back(targets[i]);
    }
  require(!rows.empty(), "mlm_loss over a batch with no selected positions");
  Mat<S> sub(rows.size(), logits.cols());
  for (size_t i = 0; i < rows.size(); ++i)
    sub.row(static_cast<Eigen::Index>(i)) = logits.row(rows[i]);
  Mat<S> d_sub;
  const S loss = masked_cross_entropy(sub, gathered, d_logits ? &d_sub : nullptr);
  if (d_logits) {
    d_logits->setZero(logits.rows(), logits.cols());
    for (size_t i = 0; i < rows.size(); ++i)
      d_logits->row(rows[i]) = d_sub.row(static_cast<Eigen::Index>(i));
  }
  return loss;
}

// Mean binary cross entropy over every (doc, label) cell, in the
// overflow-safe form max(z,0) - z*y + log(1 + exp(-|z|)).
template <class S>
S bce_multilabel_loss(const Mat<S>& logits, const Mat<S>& labels,
                      Mat<S>* d_logits = nullptr) {
  require(logits.rows() == labels.rows() && logits.cols() == labels.cols(),
          "logits/labels shape mismatch");
  require(logits.size() > 0, "empty bce batch");
  const S n = S(logits.size());
  if (d_logits) d_logits->resize(logits.rows(), logits.cols());
  S total = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r)
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      const S y = labels(r, c);
      require(y == S(0) || y == S(1), "label must be 0 or 1, got ", y);
      const S z = logits(r, c);
      total += std::max(z, S(0)) - z * y + std::log1p(std::exp(-std::abs(z)));
      if (d_logits) (*d_logits)(r, c) = (detail::stable_sigmoid(z) - y) / n;
    }
  return total / n;
}

struct TripletDiagnostics {
  // Smallest |value| of the maximal hinge argument across rows/columns; a
  // value near zero means the loss sits next to a hinge kink.
  double min_abs_hinge = std::numeric_limits<double>::infinity();
  // Smallest gap between the best and second-best negative; near zero means
  // the active hard negative is about to switch.
  double min_argmax_gap = std::numeric_limits<double>::infinity();
};

// VSE++-style max-of-hinges triplet loss over an N x N similarity matrix
// whose diagonal holds the true pairs. When group_ids is given, candidates
// sharing the anchor's group are excluded from the negative pool (pairs from
// the same source case are not true negatives).
template <class S>
S triplet_mh_loss(const Mat<S>& sim, double margin,
                  const std::vector<int>* group_ids = nullptr,
                  Mat<S>* d_sim = nullptr, TripletDiagnostics* diag = nullptr) {
  const Eigen::Index n = sim.rows();
  require(n >= 2, "triplet loss needs at least 2 pairs, got ", n);
  require(sim.cols() == n, "similarity matrix must be square");
  require(margin > 0, "margin must be positive");
  if (group_ids)
    require(static_cast<Eigen::Index>(group_ids->size()) == n,
            "group_ids size mismatch");
  if (d_sim) d_sim->setZero(n, n);

  auto allowed = [&](Eigen::Index i, Eigen::Index j) {
    if (i == j) return false;
    if (group_ids && (*group_ids)[static_cast<size_t>(i)] ==
                         (*group_ids)[static_cast<size_t>(j)])
      return false;
    return true;
  };

  S total = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (const bool row_side : {true, false}) {
      S best = -std::numeric_limits<S>::infinity();
      S second = -std::numeric_limits<S>::infinity();
      Eigen::Index best_j = -1;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (!allowed(i, j)) continue;
        const S neg_sim = row_side ? sim(i, j) : sim(j, i);
        const S value = S(margin) - sim(i, i) + neg_sim;
        if (value > best) {
          second = best;
          best = value;
          best_j = j;
        } else if (value > second) {
          second = value;
        }
      }
      if (best_j < 0) continue;  // no admissible negative for this anchor
      if (diag) {
        diag->min_abs_hinge =
            std::min(diag->min_abs_hinge, std::abs(static_cast<double>(best)));
        if (std::isfinite(static_cast<double>(second)))
          diag->min_argmax_gap = std::min(
              diag->min_argmax_gap, static_cast<double>(best - second));
      }
      if (best > S(0)) {
        total += best;
        if (d_sim) {
          (*d_sim)(i, i) -= S(1) / S(n);
          if (row_side)
            (*d_sim)(i, best_j) += S(1) / S(n);
          else
            (*d_sim)(best_j, i) += S(1) / S(n);
        }
      }
    }
  }
  return total / S(n);
}

}  // namespace dapt
