#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dapt/rng.hpp"
#include "dapt/tensor.hpp"

namespace dapt {

enum class Precision { kF32, kF64 };

inline const char* to_string(Precision p) {
  return p == Precision::kF32 ? "f32" : "f64";
}

inline Precision precision_from_string(const std::string& s) {
  if (s == "f32") return Precision::kF32;
  if (s == "f64") return Precision::kF64;
  fail("unknown precision '", s, "'");
}

struct TrainConfig {
  double base_lr = 3e-5;
  long long total_steps = 0;  // 0: derived as epochs * batches per epoch
  double min_lr = 0.0;
  int batch_size = 16;
  int epochs = 40;
  int patience = 7;
  uint64_t seed = 0;
  std::optional<double> grad_clip;
  Precision precision = Precision::kF32;
  double weight_decay = 0.0;
  double mask_rate = 0.15;  // MLM only

  void validate() const {
    require(base_lr > 0, "base_lr must be positive");
    require(min_lr >= 0 && min_lr <= base_lr, "need 0 <= min_lr <= base_lr");
    require(batch_size > 0 && epochs > 0 && patience > 0,
            "batch_size, epochs and patience must be positive");
    require(total_steps >= 0, "total_steps must be >= 0");
    require(mask_rate > 0 && mask_rate < 1, "mask_rate must be in (0, 1)");
    require(weight_decay >= 0, "weight_decay must be >= 0");
    if (grad_clip) require(*grad_clip > 0, "grad_clip must be positive");
  }
};

// Linear decay from base_lr at step 0 to min_lr at total_steps; no warmup.
inline double lr_schedule(long long step, const TrainConfig& cfg) {
  require(cfg.total_steps > 0, "total_steps not resolved");
  require(step >= 0 && step <= cfg.total_steps, "step ", step,
          " outside [0, ", cfg.total_steps, "]");
  const double frac =
      1.0 - static_cast<double>(step) / static_cast<double>(cfg.total_steps);
  return cfg.min_lr + (cfg.base_lr - cfg.min_lr) * frac;
}

struct EarlyStopState {
  double best_dev_metric = 0.0;
  long long best_step = -1;
  int epochs_since_improvement = 0;
  bool has_best = false;
};

// Strict-improvement rule: a tie counts as no improvement. Returns true when
// epochs_since_improvement exceeds patience.
inline bool early_stop_update(EarlyStopState& s, double dev_metric,
                              bool higher_is_better, int patience,
                              long long step = -1) {
  const bool improved =
      !s.has_best || (higher_is_better ? dev_metric > s.best_dev_metric
                                       : dev_metric < s.best_dev_metric);
  if (improved) {
    s.best_dev_metric = dev_metric;
    s.best_step = step;
    s.epochs_since_improvement = 0;
    s.has_best = true;
  } else {
    ++s.epochs_since_improvement;
  }
  return s.epochs_since_improvement > patience;
}

struct TrainReport {
  std::vector<std::pair<long long, double>> loss_curve;  // (step, loss)
  double final_eval_loss = 0.0;
  std::optional<double> perplexity_before;  // MLM runs only
  std::optional<double> perplexity_after;
  double wall_time_seconds = 0.0;  // volatile; kept out of serialized reports
  uint64_t seed = 0;
  long long steps_run = 0;
  double best_dev_metric = 0.0;
  long long best_step = -1;
  int epochs_run = 0;
  bool stopped_early = false;
};

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::optional<double> grad_clip;  // max global gradient norm
  double weight_decay = 0.0;        // plain L2 added to the gradient
};

template <class S>
class Adam {
 public:
  explicit Adam(const ParamStore<S>& store, AdamConfig cfg = {}) : cfg_(cfg) {
    m_.reserve(store.size());
    v_.reserve(store.size());
    for (int i = 0; i < store.size(); ++i) {
      m_.push_back(Mat<S>::Zero(store[i].value.rows(), store[i].value.cols()));
      v_.push_back(Mat<S>::Zero(store[i].value.rows(), store[i].value.cols()));
    }
  }

  // One bias-corrected Adam step over the trainable parameters. Frozen
  // parameters are untouched even when a gradient was accumulated for them.
  void step(ParamStore<S>& store, double lr) {
    require(store.size() == static_cast<int>(m_.size()),
            "optimizer state does not match the parameter store");
    double sq_norm = 0.0;
    for (int i = 0; i < store.size(); ++i) {
      Param<S>& p = store[i];
      if (!p.trainable) continue;
      require(p.grad.allFinite(), "non-finite gradient in tensor '", p.name, "'");
      sq_norm += static_cast<double>(
          p.grad.template cast<double>().squaredNorm());
    }
    double scale = 1.0;
    if (cfg_.grad_clip) {
      const double norm = std::sqrt(sq_norm);
      if (norm > *cfg_.grad_clip) scale = *cfg_.grad_clip / norm;
    }
    ++t_;
    const S b1 = static_cast<S>(cfg_.beta1), b2 = static_cast<S>(cfg_.beta2);
    const S corr1 = static_cast<S>(1.0 - std::pow(cfg_.beta1, t_));
    const S corr2 = static_cast<S>(1.0 - std::pow(cfg_.beta2, t_));
    for (int i = 0; i < store.size(); ++i) {
      Param<S>& p = store[i];
      if (!p.trainable) continue;
      Mat<S> g = p.grad * static_cast<S>(scale);
      if (cfg_.weight_decay > 0)
        g += p.value * static_cast<S>(cfg_.weight_decay);
      m_[i] = b1 * m_[i] + (S(1) - b1) * g;
      v_[i] = b2 * v_[i] + (S(1) - b2) * g.cwiseProduct(g);
      p.value.array() -= static_cast<S>(lr) * (m_[i].array() / corr1) /
                         ((v_[i].array() / corr2).sqrt() + static_cast<S>(cfg_.eps));
    }
  }

  long long steps_taken() const { return t_; }

 private:
  AdamConfig cfg_;
  long long t_ = 0;
  std::vector<Mat<S>> m_, v_;
};

// ---------------------------------------------------------------------------
// Finite-difference gradient oracle (f64 only)
// ---------------------------------------------------------------------------

struct FdResult {
  double max_rel_err = 0.0;
  std::string worst_param;
  int coords_checked = 0;
};

// Central differences over randomly sampled coordinates of every trainable
// tensor; `loss(with_grad)` must evaluate the loss deterministically and,
// when asked, accumulate analytic gradients into the store.
inline FdResult finite_difference_check(
    ParamStore<double>& store, const std::function<double(bool)>& loss,
    double eps = 1e-5, int min_coords = 200, uint64_t seed = 0) {
  store.zero_grads();
  loss(true);
  std::vector<Mat<double>> analytic;
  analytic.reserve(store.size());
  for (int i = 0; i < store.size(); ++i) analytic.push_back(store[i].grad);

  int trainable = 0;
  for (int i = 0; i < store.size(); ++i)
    if (store[i].trainable) ++trainable;
  require(trainable > 0, "no trainable tensors to check");
  const int per_tensor = std::max(1, (min_coords + trainable - 1) / trainable);

  Rng rng(seed);
  FdResult result;
  for (int i = 0; i < store.size(); ++i) {
    Param<double>& p = store[i];
    if (!p.trainable) continue;
    for (int k = 0; k < per_tensor; ++k) {
      const Eigen::Index idx =
          static_cast<Eigen::Index>(rng.below(static_cast<uint64_t>(p.value.size())));
      const double saved = p.value.data()[idx];
      p.value.data()[idx] = saved + eps;
      const double up = loss(false);
      p.value.data()[idx] = saved - eps;
      const double down = loss(false);
      p.value.data()[idx] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double exact = analytic[static_cast<size_t>(i)].data()[idx];
      const double rel = std::abs(exact - numeric) /
                         std::max({std::abs(exact), std::abs(numeric), 1e-12});
      ++result.coords_checked;
      if (rel > result.max_rel_err) {
        result.max_rel_err = rel;
        result.worst_param = p.name;
      }
    }
  }
  return result;
}

}  // namespace dapt
