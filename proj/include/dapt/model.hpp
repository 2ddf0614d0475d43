#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dapt/encoder.hpp"

namespace dapt {

enum class FinetuneMode { kFull, kAdapterOnly };

inline const char* to_string(FinetuneMode m) {
  return m == FinetuneMode::kFull ? "full" : "adapter-only";
}

// Encoder plus whichever task heads are attached, all sharing one ParamStore.
template <class S>
struct Model {
  ParamStore<S> store;
  Encoder<S> encoder;
  uint64_t init_seed = 0;

  struct MlmHead {
    int transform_w, transform_b, ln_g, ln_b;
    int out_w = -1;  // -1 when tied to the token embeddings
    int out_b;
    bool tied = true;
  };
  struct ClassifierHead {
    int w, b;
    int num_labels;
  };
  struct RetrievalHeads {
    int case_w, case_b, catch_w, catch_b;
    int shared_dim;
  };

  std::optional<MlmHead> mlm;
  std::optional<ClassifierHead> classifier;
  std::optional<RetrievalHeads> retrieval;

  const EncoderConfig& config() const { return encoder.config(); }
};

template <class S>
Model<S> init_model(const EncoderConfig& cfg, uint64_t seed) {
  cfg.validate();
  Model<S> m;
  m.init_seed = seed;
  Rng rng = Rng(seed).fork(0x6d6f64656c);  // model stream
  m.encoder = Encoder<S>::build(m.store, cfg, rng);
  return m;
}

template <class S>
void insert_adapters(Model<S>& m, const AdapterConfig& acfg) {
  Rng rng = Rng(m.init_seed).fork(0x61646170);  // adapter stream
  m.encoder.insert_adapters(m.store, acfg, rng);
}

template <class S>
void attach_mlm_head(Model<S>& m, bool tie_output_to_embeddings = true) {
  require(!m.mlm.has_value(), "mlm head already attached");
  const EncoderConfig& cfg = m.config();
  Rng rng = Rng(m.init_seed).fork(0x6d6c6d);
  typename Model<S>::MlmHead h;
  h.transform_w = m.store.add("mlm_head.transform_w", ParamGroup::kHead,
                              cfg.hidden_dim, cfg.hidden_dim);
  nn::fill_truncated_normal(m.store[h.transform_w].value, rng, kInitStd);
  h.transform_b = m.store.add("mlm_head.transform_b", ParamGroup::kHead, 1,
                              cfg.hidden_dim);
  h.ln_g = m.store.add("mlm_head.ln.scale", ParamGroup::kHead, 1,
                       cfg.hidden_dim, true);
  m.store[h.ln_g].value.setOnes();
  h.ln_b = m.store.add("mlm_head.ln.shift", ParamGroup::kHead, 1,
                       cfg.hidden_dim, true);
  h.tied = tie_output_to_embeddings;
  if (!h.tied) {
    h.out_w = m.store.add("mlm_head.out_w", ParamGroup::kHead, cfg.hidden_dim,
                          cfg.vocab_size);
    nn::fill_truncated_normal(m.store[h.out_w].value, rng, kInitStd);
  }
  h.out_b = m.store.add("mlm_head.out_b", ParamGroup::kHead, 1, cfg.vocab_size);
  m.mlm = h;
}

template <class S>
void attach_classifier_head(Model<S>& m, int num_labels) {
  require(!m.classifier.has_value(), "classifier head already attached");
  require(num_labels > 0, "num_labels must be positive");
  Rng rng = Rng(m.init_seed).fork(0x636c73);
  typename Model<S>::ClassifierHead h;
  h.num_labels = num_labels;
  h.w = m.store.add("classifier.w", ParamGroup::kHead, m.config().hidden_dim,
                    num_labels);
  nn::fill_truncated_normal(m.store[h.w].value, rng, kInitStd);
  h.b = m.store.add("classifier.b", ParamGroup::kHead, 1, num_labels);
  m.classifier = h;
}

template <class S>
void attach_retrieval_heads(Model<S>& m, int shared_dim) {
  require(!m.retrieval.has_value(), "retrieval heads already attached");
  require(shared_dim > 0, "shared_dim must be positive");
  Rng rng = Rng(m.init_seed).fork(0x726574);
  typename Model<S>::RetrievalHeads h;
  h.shared_dim = shared_dim;
  h.case_w = m.store.add("retrieval.case_w", ParamGroup::kHead,
                         m.config().hidden_dim, shared_dim);
  nn::fill_truncated_normal(m.store[h.case_w].value, rng, kInitStd);
  h.case_b = m.store.add("retrieval.case_b", ParamGroup::kHead, 1, shared_dim);
  h.catch_w = m.store.add("retrieval.catch_w", ParamGroup::kHead,
                          m.config().hidden_dim, shared_dim);
  nn::fill_truncated_normal(m.store[h.catch_w].value, rng, kInitStd);
  h.catch_b = m.store.add("retrieval.catch_b", ParamGroup::kHead, 1, shared_dim);
  m.retrieval = h;
}

// -- parameter-group selection ----------------------------------------------

struct TrainableSelection {
  long long trainable_scalars = 0;
  long long total_scalars = 0;
  std::vector<std::string> trainable_names;

  double trainable_fraction() const {
    return total_scalars == 0
               ? 0.0
               : static_cast<double>(trainable_scalars) / total_scalars;
  }
};

// full: everything trains. adapter-only (Houlsby recipe): adapters, heads and
// layer-norm scale/shift train; the rest of the base model is frozen.
template <class S>
TrainableSelection set_trainable_parameters(Model<S>& m, FinetuneMode mode) {
  if (mode == FinetuneMode::kAdapterOnly)
    require(m.encoder.has_adapters(),
            "adapter-only mode requires adapters; call insert_adapters first");
  TrainableSelection sel;
  for (Param<S>& p : m.store) {
    p.trainable = mode == FinetuneMode::kFull ||
                  p.group == ParamGroup::kAdapter ||
                  p.group == ParamGroup::kHead || p.is_layer_norm;
    sel.total_scalars += p.value.size();
    if (p.trainable) {
      sel.trainable_scalars += p.value.size();
      sel.trainable_names.push_back(p.name);
    }
  }
  return sel;
}

// -- MLM head ----------------------------------------------------------------

template <class S>
struct MlmHeadTrace {
  std::vector<int> rows;  // flat (b*T + t) indices the logits were taken at
  Mat<S> x;               // gathered hidden states
  Mat<S> pre, act;        // transform pre/post GELU
  Mat<S> ln_xhat;
  Vec<S> ln_rstd;
  Mat<S> normed;
};

// Logits (M x V) at the selected positions only; the full vocabulary matmul
// runs just on masked rows.
template <class S>
Mat<S> mlm_head_forward(const Model<S>& m, const ForwardTrace<S>& t,
                        const std::vector<int>& rows, MlmHeadTrace<S>& ht) {
  require(m.mlm.has_value(), "no mlm head attached");
  const auto& h = *m.mlm;
  const int M = static_cast<int>(rows.size());
  ht.rows = rows;
  ht.x.resize(M, t.output.cols());
  for (int i = 0; i < M; ++i) ht.x.row(i) = t.output.row(rows[i]);

  nn::linear_forward(ht.x, m.store[h.transform_w].value,
                     m.store[h.transform_b].value, ht.pre);
  ht.act = ht.pre.unaryExpr([](S v) { return nn::gelu(v); });
  nn::layer_norm_forward(ht.act, m.store[h.ln_g].value, m.store[h.ln_b].value,
                         ht.normed, ht.ln_xhat, ht.ln_rstd);
  const Mat<S>& out_w = h.tied ? m.store[m.encoder.token_embedding_id()].value
                               : m.store[h.out_w].value;
  Mat<S> logits;
  if (h.tied)
    logits.noalias() = ht.normed * out_w.transpose();
  else
    logits.noalias() = ht.normed * out_w;
  logits.rowwise() += m.store[h.out_b].value.row(0);
  return logits;
}

// Accumulates head gradients and adds the positional gradient into d_hidden
// (shaped like trace.output).
template <class S>
void mlm_head_backward(Model<S>& m, const MlmHeadTrace<S>& ht,
                       const Mat<S>& d_logits, Mat<S>& d_hidden) {
  const auto& h = *m.mlm;
  m.store[h.out_b].grad.row(0) += d_logits.colwise().sum();
  Mat<S> d_normed;
  if (h.tied) {
    const Mat<S>& emb = m.store[m.encoder.token_embedding_id()].value;
    m.store[m.encoder.token_embedding_id()].grad.noalias() +=
        d_logits.transpose() * ht.normed;
    d_normed.noalias() = d_logits * emb;
  } else {
    m.store[h.out_w].grad.noalias() += ht.normed.transpose() * d_logits;
    d_normed.noalias() = d_logits * m.store[h.out_w].value.transpose();
  }
  Mat<S> d_act;
  nn::layer_norm_backward(ht.ln_xhat, ht.ln_rstd, m.store[h.ln_g].value,
                          d_normed, m.store[h.ln_g].grad, m.store[h.ln_b].grad,
                          d_act);
  Mat<S> d_pre =
      d_act.cwiseProduct(ht.pre.unaryExpr([](S v) { return nn::gelu_grad(v); }));
  Mat<S> d_x = Mat<S>::Zero(ht.x.rows(), ht.x.cols());
  nn::linear_backward(ht.x, m.store[h.transform_w].value, d_pre,
                      m.store[h.transform_w].grad, m.store[h.transform_b].grad,
                      &d_x);
  for (size_t i = 0; i < ht.rows.size(); ++i)
    d_hidden.row(ht.rows[i]) += d_x.row(static_cast<int>(i));
}

// -- classifier head ----------------------------------------------------------

template <class S>
Mat<S> classifier_forward(const Model<S>& m, const Mat<S>& pooled) {
  require(m.classifier.has_value(), "no classifier head attached");
  Mat<S> logits;
  nn::linear_forward(pooled, m.store[m.classifier->w].value,
                     m.store[m.classifier->b].value, logits);
  return logits;
}

template <class S>
void classifier_backward(Model<S>& m, const Mat<S>& pooled,
                         const Mat<S>& d_logits, Mat<S>& d_pooled) {
  d_pooled.setZero(pooled.rows(), pooled.cols());
  nn::linear_backward(pooled, m.store[m.classifier->w].value, d_logits,
                      m.store[m.classifier->w].grad,
                      m.store[m.classifier->b].grad, &d_pooled);
}

// -- retrieval projections ----------------------------------------------------

template <class S>
struct ProjectionTrace {
  Mat<S> pooled;    // inputs
  Mat<S> projected; // pre-normalization
  Vec<S> norms;
  Mat<S> unit;      // output rows, unit L2 norm
};

template <class S>
void project_and_normalize(const Model<S>& m, bool case_side,
                           const Mat<S>& pooled, ProjectionTrace<S>& pt) {
  require(m.retrieval.has_value(), "no retrieval heads attached");
  const auto& h = *m.retrieval;
  pt.pooled = pooled;
  nn::linear_forward(pooled, m.store[case_side ? h.case_w : h.catch_w].value,
                     m.store[case_side ? h.case_b : h.catch_b].value,
                     pt.projected);
  const Eigen::Index n = pt.projected.rows();
  pt.norms.resize(n);
  pt.unit.resize(n, pt.projected.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const S norm = pt.projected.row(i).norm();
    require(norm > S(0), "zero-norm retrieval projection");
    pt.norms[i] = norm;
    pt.unit.row(i) = pt.projected.row(i) / norm;
  }
}

template <class S>
void project_and_normalize_backward(Model<S>& m, bool case_side,
                                    const ProjectionTrace<S>& pt,
                                    const Mat<S>& d_unit, Mat<S>& d_pooled) {
  const auto& h = *m.retrieval;
  Mat<S> d_proj(pt.projected.rows(), pt.projected.cols());
  for (Eigen::Index i = 0; i < pt.projected.rows(); ++i) {
    const S dot = pt.unit.row(i).dot(d_unit.row(i));
    d_proj.row(i) = (d_unit.row(i) - pt.unit.row(i) * dot) / pt.norms[i];
  }
  d_pooled.setZero(pt.pooled.rows(), pt.pooled.cols());
  nn::linear_backward(pt.pooled, m.store[case_side ? h.case_w : h.catch_w].value,
                      d_proj, m.store[case_side ? h.case_w : h.catch_w].grad,
                      m.store[case_side ? h.case_b : h.catch_b].grad, &d_pooled);
}

}  // namespace dapt
