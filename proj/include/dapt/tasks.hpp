#pragma once

#include <algorithm>
#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dapt/checkpoint.hpp"
#include "dapt/corpus.hpp"
#include "dapt/losses.hpp"
#include "dapt/metrics.hpp"
#include "dapt/model.hpp"
#include "dapt/train.hpp"

namespace dapt {

// ---------------------------------------------------------------------------
// Batch losses: one forward (+ optional backward) through the full model.
// The training loops, the unit tests and the finite-difference oracle all go
// through these, so the gradient that is checked is the gradient that trains.
// ---------------------------------------------------------------------------

template <class S>
S mlm_batch_loss(Model<S>& m, const TokenBatch& batch,
                 const std::vector<int32_t>& flat_targets, bool with_grad,
                 bool train_mode = false, Rng* dropout_rng = nullptr) {
  require(flat_targets.size() == batch.ids.size(),
          "targets must align with the flattened batch");
  std::vector<int> rows;
  std::vector<int32_t> gathered;
  for (size_t i = 0; i < flat_targets.size(); ++i)
    if (flat_targets[i] != MaskedSeq::kIgnoreTarget) {
      rows.push_back(static_cast<int>(i));
      gathered.push_back(flat_targets[i]);
    }
  require(!rows.empty(), "batch has no masked positions");

  ForwardTrace<S> trace;
  m.encoder.forward(m.store, batch, train_mode, dropout_rng, trace);
  MlmHeadTrace<S> head_trace;
  const Mat<S> logits = mlm_head_forward(m, trace, rows, head_trace);
  Mat<S> d_logits;
  const S loss =
      masked_cross_entropy(logits, gathered, with_grad ? &d_logits : nullptr);
  if (with_grad) {
    Mat<S> d_hidden = Mat<S>::Zero(trace.output.rows(), trace.output.cols());
    mlm_head_backward(m, head_trace, d_logits, d_hidden);
    m.encoder.backward(m.store, trace, d_hidden);
  }
  return loss;
}

template <class S>
S classifier_batch_loss(Model<S>& m, const TokenBatch& batch,
                        const Mat<S>& labels, bool with_grad,
                        bool train_mode = false, Rng* dropout_rng = nullptr,
                        PoolStrategy pool = PoolStrategy::kCls) {
  ForwardTrace<S> trace;
  m.encoder.forward(m.store, batch, train_mode, dropout_rng, trace);
  const Mat<S> pooled = Encoder<S>::pool(trace, pool);
  const Mat<S> logits = classifier_forward(m, pooled);
  Mat<S> d_logits;
  const S loss = bce_multilabel_loss(logits, labels, with_grad ? &d_logits : nullptr);
  if (with_grad) {
    Mat<S> d_pooled;
    classifier_backward(m, pooled, d_logits, d_pooled);
    Mat<S> d_hidden;
    Encoder<S>::pool_backward(trace, pool, d_pooled, d_hidden);
    m.encoder.backward(m.store, trace, d_hidden);
  }
  return loss;
}

template <class S>
S retrieval_batch_loss(Model<S>& m, const TokenBatch& case_batch,
                       const TokenBatch& phrase_batch, double margin,
                       const std::vector<int>* case_groups, bool with_grad,
                       bool train_mode = false, Rng* dropout_rng = nullptr,
                       TripletDiagnostics* diag = nullptr,
                       PoolStrategy pool = PoolStrategy::kCls) {
  require(case_batch.batch == phrase_batch.batch,
          "case/phrase batches must pair up");
  ForwardTrace<S> case_trace, phrase_trace;
  m.encoder.forward(m.store, case_batch, train_mode, dropout_rng, case_trace);
  m.encoder.forward(m.store, phrase_batch, train_mode, dropout_rng, phrase_trace);
  ProjectionTrace<S> case_proj, phrase_proj;
  project_and_normalize(m, true, Encoder<S>::pool(case_trace, pool), case_proj);
  project_and_normalize(m, false, Encoder<S>::pool(phrase_trace, pool),
                        phrase_proj);
  Mat<S> sim;
  sim.noalias() = case_proj.unit * phrase_proj.unit.transpose();
  Mat<S> d_sim;
  const S loss = triplet_mh_loss(sim, margin, case_groups,
                                 with_grad ? &d_sim : nullptr, diag);
  if (with_grad) {
    Mat<S> d_case_unit = d_sim * phrase_proj.unit;
    Mat<S> d_phrase_unit = d_sim.transpose() * case_proj.unit;
    Mat<S> d_pooled;
    project_and_normalize_backward(m, true, case_proj, d_case_unit, d_pooled);
    Mat<S> d_hidden;
    Encoder<S>::pool_backward(case_trace, pool, d_pooled, d_hidden);
    m.encoder.backward(m.store, case_trace, d_hidden);
    project_and_normalize_backward(m, false, phrase_proj, d_phrase_unit,
                                   d_pooled);
    Encoder<S>::pool_backward(phrase_trace, pool, d_pooled, d_hidden);
    m.encoder.backward(m.store, phrase_trace, d_hidden);
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Parameter snapshots (early stopping keeps the best epoch)
// ---------------------------------------------------------------------------

template <class S>
std::vector<Mat<S>> snapshot_values(const ParamStore<S>& store) {
  std::vector<Mat<S>> out;
  out.reserve(store.size());
  for (int i = 0; i < store.size(); ++i) out.push_back(store[i].value);
  return out;
}

template <class S>
void restore_values(ParamStore<S>& store, const std::vector<Mat<S>>& snap) {
  require(static_cast<int>(snap.size()) == store.size(), "snapshot mismatch");
  for (int i = 0; i < store.size(); ++i) store[i].value = snap[i];
}

// ---------------------------------------------------------------------------
// Perplexity and DAPT
// ---------------------------------------------------------------------------

// exp(mean masked-token NLL) over the corpus under a fixed evaluation
// masking seed. The mean is over all masked positions, so a single batch
// satisfies perplexity == exp(mlm_loss) exactly.
template <class S>
double perplexity(Model<S>& m, const Vocab& v,
                  const std::vector<std::string>& lines, int encode_len,
                  double mask_rate = 0.15, uint64_t eval_seed = 0x9e11,
                  int batch_size = 16) {
  require(!lines.empty(), "perplexity over an empty corpus");
  double total_nll = 0.0;
  long long total_positions = 0;
  std::vector<TokenSeq> pending;
  std::vector<int32_t> pending_targets;
  auto flush = [&]() {
    if (pending.empty()) return;
    TokenBatch batch = TokenBatch::from(pending);
    const long long n = static_cast<long long>(std::count_if(
        pending_targets.begin(), pending_targets.end(),
        [](int32_t t) { return t != MaskedSeq::kIgnoreTarget; }));
    if (n > 0) {
      const S loss = mlm_batch_loss(m, batch, pending_targets, false);
      total_nll += static_cast<double>(loss) * static_cast<double>(n);
      total_positions += n;
    }
    pending.clear();
    pending_targets.clear();
  };
  for (size_t i = 0; i < lines.size(); ++i) {
    const TokenSeq seq = encode(v, lines[i], encode_len);
    const MaskedSeq masked =
        mask_for_mlm(v, seq, mask_rate, mix_seed(eval_seed, i));
    pending.push_back(masked.input);
    pending_targets.insert(pending_targets.end(), masked.targets.begin(),
                           masked.targets.end());
    if (static_cast<int>(pending.size()) == batch_size) flush();
  }
  flush();
  require(total_positions > 0, "no maskable positions in evaluation corpus");
  return std::exp(total_nll / static_cast<double>(total_positions));
}

// MLM pre-training loop: dynamic masking each epoch, Adam with linear decay.
// Evaluation perplexity (fixed masking seed) is recorded before and after.
template <class S>
TrainReport run_dapt(Model<S>& m, const Vocab& v,
                     const std::vector<std::string>& train_lines,
                     const std::vector<std::string>& eval_lines,
                     const TrainConfig& cfg, int encode_len) {
  cfg.validate();
  require(!train_lines.empty(), "empty training corpus");
  if (!m.mlm.has_value()) attach_mlm_head(m);
  const auto t0 = std::chrono::steady_clock::now();

  TrainReport report;
  report.seed = cfg.seed;
  report.perplexity_before =
      perplexity(m, v, eval_lines, encode_len, cfg.mask_rate);

  std::vector<TokenSeq> encoded;
  encoded.reserve(train_lines.size());
  for (const std::string& line : train_lines)
    encoded.push_back(encode(v, line, encode_len));

  const long long batches_per_epoch =
      (static_cast<long long>(encoded.size()) + cfg.batch_size - 1) /
      cfg.batch_size;
  TrainConfig schedule = cfg;
  if (schedule.total_steps == 0)
    schedule.total_steps = std::max<long long>(1, cfg.epochs * batches_per_epoch);

  AdamConfig adam_cfg;
  adam_cfg.grad_clip = cfg.grad_clip;
  adam_cfg.weight_decay = cfg.weight_decay;
  Adam<S> adam(m.store, adam_cfg);
  Rng base_rng(cfg.seed);

  long long step = 0;
  for (int epoch = 0; epoch < cfg.epochs && step < schedule.total_steps; ++epoch) {
    std::vector<size_t> order(encoded.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng epoch_rng = base_rng.fork(mix_seed(0xe90c4, epoch));
    epoch_rng.shuffle(order);
    Rng dropout_rng = base_rng.fork(mix_seed(0xd909, epoch));

    for (size_t start = 0;
         start < order.size() && step < schedule.total_steps;
         start += static_cast<size_t>(cfg.batch_size)) {
      const size_t end =
          std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      std::vector<TokenSeq> inputs;
      std::vector<int32_t> targets;
      bool any_selected = false;
      for (size_t i = start; i < end; ++i) {
        const MaskedSeq masked =
            mask_for_mlm(v, encoded[order[i]], cfg.mask_rate,
                         mix_seed(mix_seed(cfg.seed, epoch), order[i]));
        inputs.push_back(masked.input);
        for (const int32_t t : masked.targets)
          any_selected |= t != MaskedSeq::kIgnoreTarget;
        targets.insert(targets.end(), masked.targets.begin(),
                       masked.targets.end());
      }
      if (!any_selected) continue;  // nothing to predict in this batch
      TokenBatch batch = TokenBatch::from(inputs);
      m.store.zero_grads();
      const S loss =
          mlm_batch_loss(m, batch, targets, true, true, &dropout_rng);
      adam.step(m.store, lr_schedule(step, schedule));
      report.loss_curve.emplace_back(step, static_cast<double>(loss));
      ++step;
    }
    report.epochs_run = epoch + 1;
  }
  report.steps_run = step;
  report.perplexity_after =
      perplexity(m, v, eval_lines, encode_len, cfg.mask_rate);
  report.final_eval_loss = std::log(*report.perplexity_after);
  report.best_dev_metric = *report.perplexity_after;
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return report;
}

// Softmax over the vocabulary at the single masked position; top-k
// (token, probability) by probability, ties broken by token id.
template <class S>
std::vector<std::pair<std::string, double>> fill_mask(Model<S>& m,
                                                      const Vocab& v,
                                                      const std::string& text,
                                                      int k, int encode_len) {
  require(k >= 1, "k must be >= 1");
  require(m.mlm.has_value(), "fill_mask needs an mlm head");
  const TokenSeq seq = encode(v, text, encode_len);
  std::vector<int> mask_positions;
  for (int i = 0; i < seq.length(); ++i)
    if (seq.ids[static_cast<size_t>(i)] == Vocab::kMask) mask_positions.push_back(i);
  require(mask_positions.size() == 1, "text must contain exactly one ",
          Vocab::special_string(Vocab::kMask), " marker, found ",
          mask_positions.size());

  TokenBatch batch = TokenBatch::from({seq});
  ForwardTrace<S> trace;
  m.encoder.forward(m.store, batch, false, nullptr, trace);
  MlmHeadTrace<S> head_trace;
  const Mat<S> logits = mlm_head_forward(m, trace, {mask_positions[0]}, head_trace);

  const Eigen::Index vocab = logits.cols();
  const S zmax = logits.row(0).maxCoeff();
  Vec<S> probs = (logits.row(0).array() - zmax).exp().matrix().transpose();
  probs /= probs.sum();

  std::vector<int> ids(static_cast<size_t>(vocab));
  for (Eigen::Index i = 0; i < vocab; ++i) ids[static_cast<size_t>(i)] = static_cast<int>(i);
  std::sort(ids.begin(), ids.end(), [&](int a, int b) {
    if (probs[a] != probs[b]) return probs[a] > probs[b];
    return a < b;
  });
  std::vector<std::pair<std::string, double>> out;
  const int take = std::min<int>(k, static_cast<int>(vocab));
  out.reserve(static_cast<size_t>(take));
  for (int i = 0; i < take; ++i)
    out.emplace_back(v.token(ids[static_cast<size_t>(i)]),
                     static_cast<double>(probs[ids[static_cast<size_t>(i)]]));
  return out;
}

// ---------------------------------------------------------------------------
// Classification task
// ---------------------------------------------------------------------------

// Stable label indexing shared by training, prediction and metrics.
struct LabelIndex {
  std::vector<std::string> names;  // sorted
  std::map<std::string, int> index;

  static LabelIndex from(const std::set<std::string>& universe) {
    LabelIndex li;
    li.names.assign(universe.begin(), universe.end());
    for (size_t i = 0; i < li.names.size(); ++i)
      li.index[li.names[i]] = static_cast<int>(i);
    return li;
  }
  int size() const { return static_cast<int>(names.size()); }
};

struct LabelScores {
  std::vector<double> scores;   // sigmoid per label
  std::set<int> predicted;      // scores strictly above the threshold
};

// Sigmoid label scores for already-encoded documents, batched, eval mode.
template <class S>
std::vector<std::vector<double>> score_documents(
    Model<S>& m, const std::vector<TokenSeq>& docs, int batch_size,
    PoolStrategy pool = PoolStrategy::kCls) {
  std::vector<std::vector<double>> all;
  all.reserve(docs.size());
  for (size_t start = 0; start < docs.size();
       start += static_cast<size_t>(batch_size)) {
    const size_t end =
        std::min(docs.size(), start + static_cast<size_t>(batch_size));
    const std::vector<TokenSeq> chunk(docs.begin() + start, docs.begin() + end);
    TokenBatch batch = TokenBatch::from_trimmed(chunk);
    ForwardTrace<S> trace;
    m.encoder.forward(m.store, batch, false, nullptr, trace);
    const Mat<S> logits = classifier_forward(m, Encoder<S>::pool(trace, pool));
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      std::vector<double> row(static_cast<size_t>(logits.cols()));
      for (Eigen::Index c = 0; c < logits.cols(); ++c)
        row[static_cast<size_t>(c)] = static_cast<double>(
            detail::stable_sigmoid(logits(r, c)));
      all.push_back(std::move(row));
    }
  }
  return all;
}

// Per-label sigmoid scores and the thresholded label set for one document.
// A label is predicted iff its score is strictly greater than the threshold.
template <class S>
LabelScores predict_labels(Model<S>& m, const Vocab& v,
                           const std::string& text, const LabelIndex& labels,
                           int encode_len, double threshold = 0.5) {
  require(m.classifier.has_value(), "no trained classifier attached");
  require(m.classifier->num_labels == labels.size(), "label index mismatch");
  const std::vector<std::vector<double>> scores =
      score_documents(m, std::vector<TokenSeq>{encode(v, text, encode_len)}, 1);
  LabelScores out;
  out.scores = scores.front();
  for (size_t i = 0; i < out.scores.size(); ++i)
    if (out.scores[i] > threshold) out.predicted.insert(static_cast<int>(i));
  return out;
}

struct ClassifierEval {
  ClassificationMetrics metrics;
  double loss = 0.0;
};

template <class S>
ClassifierEval evaluate_classifier(Model<S>& m,
                                   const std::vector<TokenSeq>& docs,
                                   const std::vector<std::set<int>>& gold,
                                   int num_labels, int batch_size,
                                   double threshold = 0.5) {
  const std::vector<std::vector<double>> scores =
      score_documents(m, docs, batch_size);
  ClassifierEval out;
  out.metrics = classification_metrics(scores, gold, threshold);
  // mean BCE over all cells, recomputed from scores for reporting
  double total = 0.0;
  for (size_t d = 0; d < scores.size(); ++d)
    for (int l = 0; l < num_labels; ++l) {
      const double p = std::min(std::max(scores[d][static_cast<size_t>(l)],
                                         1e-12),
                                1.0 - 1e-12);
      const bool y = gold[d].count(l) > 0;
      total += y ? -std::log(p) : -std::log1p(-p);
    }
  out.loss = total / (static_cast<double>(scores.size()) * num_labels);
  return out;
}

struct ClassifierRunResult {
  TrainReport report;
  ClassificationMetrics dev_metrics;
  LabelIndex labels;
};

// Fine-tunes the classifier head (and, per mode, the rest of the model) with
// BCE loss and early stopping on dev micro-F1. The best-epoch parameters are
// restored before returning.
template <class S>
ClassifierRunResult train_classifier(Model<S>& m, const Vocab& v,
                                     const LabeledDocSet& set,
                                     const TrainConfig& cfg, FinetuneMode mode,
                                     int encode_len,
                                     PoolStrategy pool = PoolStrategy::kCls) {
  cfg.validate();
  require(!set.train.empty(), "empty training split");
  require(!set.dev.empty(), "early stopping needs a dev split");
  const auto t0 = std::chrono::steady_clock::now();

  const LabelIndex labels = LabelIndex::from(set.label_universe);
  if (!m.classifier.has_value()) attach_classifier_head(m, labels.size());
  require(m.classifier->num_labels == labels.size(),
          "classifier head sized for ", m.classifier->num_labels,
          " labels, dataset has ", labels.size());
  set_trainable_parameters(m, mode);

  auto encode_split = [&](const std::vector<LabeledDoc>& docs,
                          std::vector<TokenSeq>& seqs,
                          std::vector<std::set<int>>& gold) {
    for (const LabeledDoc& d : docs) {
      seqs.push_back(encode(v, d.text, encode_len));
      std::set<int> g;
      for (const std::string& l : d.labels) g.insert(labels.index.at(l));
      gold.push_back(std::move(g));
    }
  };
  std::vector<TokenSeq> train_seqs, dev_seqs;
  std::vector<std::set<int>> train_gold, dev_gold;
  encode_split(set.train, train_seqs, train_gold);
  encode_split(set.dev, dev_seqs, dev_gold);

  const long long batches_per_epoch =
      (static_cast<long long>(train_seqs.size()) + cfg.batch_size - 1) /
      cfg.batch_size;
  TrainConfig schedule = cfg;
  if (schedule.total_steps == 0)
    schedule.total_steps = std::max<long long>(1, cfg.epochs * batches_per_epoch);

  AdamConfig adam_cfg;
  adam_cfg.grad_clip = cfg.grad_clip;
  adam_cfg.weight_decay = cfg.weight_decay;
  Adam<S> adam(m.store, adam_cfg);
  Rng base_rng(cfg.seed);

  TrainReport report;
  report.seed = cfg.seed;
  EarlyStopState stopper;
  std::vector<Mat<S>> best = snapshot_values(m.store);
  double best_f1 = 0.0;
  long long step = 0;

  for (int epoch = 0; epoch < cfg.epochs && step < schedule.total_steps; ++epoch) {
    std::vector<size_t> order(train_seqs.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng epoch_rng = base_rng.fork(mix_seed(0xc1a55, epoch));
    epoch_rng.shuffle(order);
    Rng dropout_rng = base_rng.fork(mix_seed(0xd909, epoch));

    for (size_t start = 0; start < order.size() && step < schedule.total_steps;
         start += static_cast<size_t>(cfg.batch_size)) {
      const size_t end =
          std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      std::vector<TokenSeq> inputs;
      Mat<S> label_matrix =
          Mat<S>::Zero(static_cast<Eigen::Index>(end - start), labels.size());
      for (size_t i = start; i < end; ++i) {
        inputs.push_back(train_seqs[order[i]]);
        for (const int l : train_gold[order[i]])
          label_matrix(static_cast<Eigen::Index>(i - start), l) = S(1);
      }
      TokenBatch batch = TokenBatch::from_trimmed(inputs);
      m.store.zero_grads();
      const S loss = classifier_batch_loss(m, batch, label_matrix, true, true,
                                           &dropout_rng, pool);
      adam.step(m.store, lr_schedule(step, schedule));
      report.loss_curve.emplace_back(step, static_cast<double>(loss));
      ++step;
    }
    report.epochs_run = epoch + 1;

    const ClassifierEval eval = evaluate_classifier(
        m, dev_seqs, dev_gold, labels.size(), cfg.batch_size);
    const bool stop =
        early_stop_update(stopper, eval.metrics.f1, true, cfg.patience, step);
    if (stopper.epochs_since_improvement == 0) {
      best = snapshot_values(m.store);
      best_f1 = eval.metrics.f1;
    }
    if (stop) {
      report.stopped_early = true;
      break;
    }
  }

  restore_values(m.store, best);
  report.steps_run = step;
  report.best_dev_metric = best_f1;
  report.best_step = stopper.best_step;

  ClassifierRunResult result;
  const ClassifierEval final_eval = evaluate_classifier(
      m, dev_seqs, dev_gold, labels.size(), cfg.batch_size);
  report.final_eval_loss = final_eval.loss;
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  result.report = std::move(report);
  result.dev_metrics = final_eval.metrics;
  result.labels = labels;
  return result;
}

// ---------------------------------------------------------------------------
// Retrieval task
// ---------------------------------------------------------------------------

// Ranks the candidate pool by cosine similarity against the case body.
// Ties break toward the lower pool index; rank values start at 1.
struct RankedPool {
  std::vector<int> order;          // pool indices, best first
  std::vector<double> similarity;  // aligned with `order`
};

template <class S>
Mat<S> embed_texts(Model<S>& m, const Vocab& v,
                   const std::vector<std::string>& texts, bool case_side,
                   int encode_len, int batch_size,
                   PoolStrategy pool = PoolStrategy::kCls) {
  require(m.retrieval.has_value(), "no retrieval heads attached");
  Mat<S> out(static_cast<Eigen::Index>(texts.size()), m.retrieval->shared_dim);
  for (size_t start = 0; start < texts.size();
       start += static_cast<size_t>(batch_size)) {
    const size_t end =
        std::min(texts.size(), start + static_cast<size_t>(batch_size));
    std::vector<TokenSeq> seqs;
    for (size_t i = start; i < end; ++i)
      seqs.push_back(encode(v, texts[i], encode_len));
    TokenBatch batch = TokenBatch::from_trimmed(seqs);
    ForwardTrace<S> trace;
    m.encoder.forward(m.store, batch, false, nullptr, trace);
    ProjectionTrace<S> proj;
    project_and_normalize(m, case_side, Encoder<S>::pool(trace, pool), proj);
    out.middleRows(static_cast<Eigen::Index>(start),
                   static_cast<Eigen::Index>(end - start)) = proj.unit;
  }
  return out;
}

template <class S>
RankedPool rank_catchphrases(Model<S>& m, const Vocab& v,
                             const std::string& case_body,
                             const std::vector<std::string>& pool,
                             int encode_len, int batch_size = 16) {
  require(!pool.empty(), "empty candidate pool");
  const Mat<S> case_vec =
      embed_texts(m, v, std::vector<std::string>{case_body}, true, encode_len,
                  batch_size);
  const Mat<S> pool_vecs = embed_texts(m, v, pool, false, encode_len, batch_size);
  Vec<S> sims = pool_vecs * case_vec.row(0).transpose();
  RankedPool out;
  out.order.resize(pool.size());
  for (size_t i = 0; i < pool.size(); ++i) out.order[i] = static_cast<int>(i);
  std::stable_sort(out.order.begin(), out.order.end(), [&](int a, int b) {
    if (sims[a] != sims[b]) return sims[a] > sims[b];
    return a < b;
  });
  out.similarity.reserve(pool.size());
  for (const int idx : out.order)
    out.similarity.push_back(static_cast<double>(sims[idx]));
  return out;
}

// Distinct catchphrases of a split, in first-appearance order, plus each
// case's gold indices into that pool.
struct RetrievalPool {
  std::vector<std::string> phrases;
  std::vector<std::set<int>> gold_per_case;
};

inline RetrievalPool build_retrieval_pool(const std::vector<Case>& cases) {
  RetrievalPool pool;
  std::map<std::string, int> seen;
  for (const Case& c : cases) {
    std::set<int> gold;
    for (const std::string& p : c.catchphrases) {
      auto [it, inserted] = seen.emplace(p, static_cast<int>(pool.phrases.size()));
      if (inserted) pool.phrases.push_back(p);
      gold.insert(it->second);
    }
    pool.gold_per_case.push_back(std::move(gold));
  }
  return pool;
}

// Best-gold rank per case over the split's own catchphrase pool.
template <class S>
std::vector<int> best_gold_ranks(Model<S>& m, const Vocab& v,
                                 const std::vector<Case>& cases,
                                 int encode_len, int batch_size = 16) {
  const RetrievalPool pool = build_retrieval_pool(cases);
  std::vector<std::string> bodies;
  for (const Case& c : cases) bodies.push_back(c.body);
  const Mat<S> case_vecs =
      embed_texts(m, v, bodies, true, encode_len, batch_size);
  const Mat<S> pool_vecs =
      embed_texts(m, v, pool.phrases, false, encode_len, batch_size);
  Mat<S> sims = case_vecs * pool_vecs.transpose();

  std::vector<int> ranks;
  ranks.reserve(cases.size());
  for (Eigen::Index c = 0; c < sims.rows(); ++c) {
    std::vector<int> order(pool.phrases.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      if (sims(c, a) != sims(c, b)) return sims(c, a) > sims(c, b);
      return a < b;
    });
    int best = static_cast<int>(order.size());
    for (size_t pos = 0; pos < order.size(); ++pos)
      if (pool.gold_per_case[static_cast<size_t>(c)].count(order[pos])) {
        best = static_cast<int>(pos) + 1;
        break;
      }
    ranks.push_back(best);
  }
  return ranks;
}

struct RetrieverRunResult {
  TrainReport report;
  RankStats dev_stats;
};

// Dual-encoder training: shared encoder, separate projections, in-batch
// hard negatives. Pairs from the same case are excluded from each other's
// negative pools. Early stopping on dev R@1.
template <class S>
RetrieverRunResult train_retriever(Model<S>& m, const Vocab& v,
                                   const CaseSet& set, const TrainConfig& cfg,
                                   double margin, int shared_dim,
                                   int case_encode_len, int phrase_encode_len) {
  cfg.validate();
  require(!set.train.empty(), "empty training split");
  require(!set.dev.empty(), "early stopping needs a dev split");
  const auto t0 = std::chrono::steady_clock::now();

  if (!m.retrieval.has_value()) attach_retrieval_heads(m, shared_dim);
  require(m.retrieval->shared_dim == shared_dim, "retrieval head dim mismatch");

  // one (case body, catchphrase) pair per annotated catchphrase
  struct Pair {
    TokenSeq body;
    TokenSeq phrase;
    int case_idx;
  };
  std::vector<Pair> pairs;
  for (size_t ci = 0; ci < set.train.size(); ++ci) {
    const Case& c = set.train[ci];
    const TokenSeq body = encode(v, c.body, case_encode_len);
    for (const std::string& p : c.catchphrases)
      pairs.push_back(
          {body, encode(v, p, phrase_encode_len), static_cast<int>(ci)});
  }
  require(pairs.size() >= 2, "need at least two training pairs");

  const long long batches_per_epoch =
      (static_cast<long long>(pairs.size()) + cfg.batch_size - 1) /
      cfg.batch_size;
  TrainConfig schedule = cfg;
  if (schedule.total_steps == 0)
    schedule.total_steps = std::max<long long>(1, cfg.epochs * batches_per_epoch);

  AdamConfig adam_cfg;
  adam_cfg.grad_clip = cfg.grad_clip;
  adam_cfg.weight_decay = cfg.weight_decay;
  Adam<S> adam(m.store, adam_cfg);
  Rng base_rng(cfg.seed);

  TrainReport report;
  report.seed = cfg.seed;
  EarlyStopState stopper;
  std::vector<Mat<S>> best = snapshot_values(m.store);
  RankStats best_stats;
  long long step = 0;

  for (int epoch = 0; epoch < cfg.epochs && step < schedule.total_steps; ++epoch) {
    std::vector<size_t> order(pairs.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng epoch_rng = base_rng.fork(mix_seed(0x9e79, epoch));
    epoch_rng.shuffle(order);
    Rng dropout_rng = base_rng.fork(mix_seed(0xd909, epoch));

    for (size_t start = 0; start < order.size() && step < schedule.total_steps;
         start += static_cast<size_t>(cfg.batch_size)) {
      const size_t end =
          std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      if (end - start < 2) continue;  // a lone pair has no in-batch negative
      std::vector<TokenSeq> bodies, phrases;
      std::vector<int> groups;
      for (size_t i = start; i < end; ++i) {
        bodies.push_back(pairs[order[i]].body);
        phrases.push_back(pairs[order[i]].phrase);
        groups.push_back(pairs[order[i]].case_idx);
      }
      TokenBatch body_batch = TokenBatch::from_trimmed(bodies);
      TokenBatch phrase_batch = TokenBatch::from_trimmed(phrases);
      m.store.zero_grads();
      const S loss = retrieval_batch_loss(m, body_batch, phrase_batch, margin,
                                          &groups, true, true, &dropout_rng);
      adam.step(m.store, lr_schedule(step, schedule));
      report.loss_curve.emplace_back(step, static_cast<double>(loss));
      ++step;
    }
    report.epochs_run = epoch + 1;

    const std::vector<int> ranks =
        best_gold_ranks(m, v, set.dev, case_encode_len, cfg.batch_size);
    const RankStats stats = rank_stats(ranks);
    const bool stop =
        early_stop_update(stopper, stats.r_at_1, true, cfg.patience, step);
    if (stopper.epochs_since_improvement == 0) {
      best = snapshot_values(m.store);
      best_stats = stats;
    }
    if (stop) {
      report.stopped_early = true;
      break;
    }
  }

  restore_values(m.store, best);
  report.steps_run = step;
  report.best_dev_metric = best_stats.r_at_1;
  report.best_step = stopper.best_step;
  report.final_eval_loss = 0.0;
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return {std::move(report), best_stats};
}

}  // namespace dapt
