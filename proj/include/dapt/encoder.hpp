#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "dapt/nn.hpp"
#include "dapt/rng.hpp"
#include "dapt/tensor.hpp"
#include "dapt/tokenizer.hpp"

namespace dapt {

inline constexpr double kInitStd = 0.02;

struct EncoderConfig {
  int vocab_size = 8192;
  int max_seq_len = 216;
  int num_layers = 4;
  int num_heads = 4;
  int hidden_dim = 128;
  int ffn_dim = 512;
  double dropout_rate = 0.1;

  int head_dim() const { return hidden_dim / num_heads; }

  void validate() const {
    require(vocab_size > 0 && num_layers > 0 && num_heads > 0 && hidden_dim > 0 &&
                ffn_dim > 0,
            "encoder dimensions must be positive");
    require(max_seq_len >= 2, "max_seq_len must be at least 2");
    require(hidden_dim % num_heads == 0, "hidden_dim ", hidden_dim,
            " not divisible by num_heads ", num_heads);
    require(dropout_rate >= 0.0 && dropout_rate < 1.0,
            "dropout_rate must be in [0, 1)");
  }
};

struct AdapterConfig {
  int bottleneck_dim = 16;

  void validate(const EncoderConfig& enc) const {
    require(bottleneck_dim > 0, "bottleneck_dim must be positive");
    require(bottleneck_dim < enc.hidden_dim, "bottleneck_dim ", bottleneck_dim,
            " must be smaller than hidden_dim ", enc.hidden_dim);
  }
};

// Uniform-length batch of encoded sequences, flattened row-major (b * T + t).
struct TokenBatch {
  int batch = 0;
  int seq_len = 0;
  std::vector<int32_t> ids;
  std::vector<uint8_t> mask;

  static TokenBatch from(const std::vector<TokenSeq>& seqs) {
    require(!seqs.empty(), "empty batch");
    TokenBatch b;
    b.batch = static_cast<int>(seqs.size());
    b.seq_len = seqs.front().length();
    for (const TokenSeq& s : seqs)
      require(s.length() == b.seq_len,
              "all sequences in a batch must share one length");
    b.ids.reserve(static_cast<size_t>(b.batch) * b.seq_len);
    b.mask.reserve(b.ids.capacity());
    for (const TokenSeq& s : seqs) {
      b.ids.insert(b.ids.end(), s.ids.begin(), s.ids.end());
      b.mask.insert(b.mask.end(), s.attention_mask.begin(),
                    s.attention_mask.end());
    }
    return b;
  }

  // Drops trailing all-pad columns shared by every row; positions stay
  // aligned so the result is equivalent under attention masking.
  static TokenBatch from_trimmed(const std::vector<TokenSeq>& seqs) {
    int longest = 2;
    for (const TokenSeq& s : seqs) longest = std::max(longest, s.num_real());
    std::vector<TokenSeq> cut(seqs);
    for (TokenSeq& s : cut) {
      if (s.length() > longest) {
        s.ids.resize(longest);
        s.attention_mask.resize(longest);
      }
    }
    return from(cut);
  }
};

template <class S>
struct LayerTrace {
  Mat<S> x;                    // layer input
  Mat<S> q, k, v;              // attention projections
  Mat<S> attn;                 // softmax probs, (B*heads*T) x T
  Mat<S> attn_drop;            // dropout mask on probs (train only)
  Mat<S> ctx;                  // merged heads, pre output projection
  Mat<S> attn_z;               // attention sublayer output after dropout
  Mat<S> attn_out_drop;        // dropout mask (train only)
  Mat<S> attn_ad_pre, attn_ad_act;
  Mat<S> ln1_xhat;
  Vec<S> ln1_rstd;
  Mat<S> y1;                   // post-LN1, FFN input
  Mat<S> ffn_pre, ffn_act;     // pre/post GELU
  Mat<S> ffn_z;                // FFN sublayer output after dropout
  Mat<S> ffn_out_drop;
  Mat<S> ffn_ad_pre, ffn_ad_act;
  Mat<S> ln2_xhat;
  Vec<S> ln2_rstd;
  Mat<S> ln2_y;                // layer output
};

template <class S>
struct ForwardTrace {
  int batch = 0;
  int seq_len = 0;
  std::vector<int32_t> ids;
  std::vector<uint8_t> mask;
  bool train_mode = false;
  std::vector<LayerTrace<S>> layers;
  Mat<S> output;  // (B*T) x H
};

enum class PoolStrategy { kCls, kMean };

// BERT-family encoder: learned token + position embeddings, post-layer-norm
// blocks, GELU feed-forward, optional Houlsby-style bottleneck adapters after
// both sublayers. Parameters live in an external ParamStore; the encoder
// itself holds only indices, so checkpoints and the optimizer see one flat
// registry.
template <class S>
class Encoder {
 public:
  struct Layer {
    int wq, bq, wk, bk, wv, bv, wo, bo;
    int ln1_g, ln1_b, w1, b1, w2, b2, ln2_g, ln2_b;
    int attn_down_w = -1, attn_down_b = -1, attn_up_w = -1, attn_up_b = -1;
    int ffn_down_w = -1, ffn_down_b = -1, ffn_up_w = -1, ffn_up_b = -1;
  };

  Encoder() = default;

  // Registers all encoder parameters and initializes them in place:
  // truncated normal (std 0.02) weights, zero biases, unit layer-norm scale.
  static Encoder build(ParamStore<S>& store, const EncoderConfig& cfg, Rng& rng) {
    cfg.validate();
    Encoder e;
    e.cfg_ = cfg;
    auto weight = [&](const std::string& name, int rows, int cols) {
      const int id = store.add(name, ParamGroup::kBase, rows, cols);
      nn::fill_truncated_normal(store[id].value, rng, kInitStd);
      return id;
    };
    auto bias = [&](const std::string& name, int cols) {
      return store.add(name, ParamGroup::kBase, 1, cols);
    };
    auto ln_pair = [&](const std::string& stem, int cols, int* g, int* b) {
      *g = store.add(stem + ".scale", ParamGroup::kBase, 1, cols, true);
      store[*g].value.setOnes();
      *b = store.add(stem + ".shift", ParamGroup::kBase, 1, cols, true);
    };

    e.tok_emb_ = weight("embeddings.token", cfg.vocab_size, cfg.hidden_dim);
    e.pos_emb_ = weight("embeddings.position", cfg.max_seq_len, cfg.hidden_dim);
    for (int l = 0; l < cfg.num_layers; ++l) {
      const std::string p = "layer." + std::to_string(l) + ".";
      Layer layer;
      layer.wq = weight(p + "attn.wq", cfg.hidden_dim, cfg.hidden_dim);
      layer.bq = bias(p + "attn.bq", cfg.hidden_dim);
      layer.wk = weight(p + "attn.wk", cfg.hidden_dim, cfg.hidden_dim);
      layer.bk = bias(p + "attn.bk", cfg.hidden_dim);
      layer.wv = weight(p + "attn.wv", cfg.hidden_dim, cfg.hidden_dim);
      layer.bv = bias(p + "attn.bv", cfg.hidden_dim);
      layer.wo = weight(p + "attn.wo", cfg.hidden_dim, cfg.hidden_dim);
      layer.bo = bias(p + "attn.bo", cfg.hidden_dim);
      ln_pair(p + "ln1", cfg.hidden_dim, &layer.ln1_g, &layer.ln1_b);
      layer.w1 = weight(p + "ffn.w1", cfg.hidden_dim, cfg.ffn_dim);
      layer.b1 = bias(p + "ffn.b1", cfg.ffn_dim);
      layer.w2 = weight(p + "ffn.w2", cfg.ffn_dim, cfg.hidden_dim);
      layer.b2 = bias(p + "ffn.b2", cfg.hidden_dim);
      ln_pair(p + "ln2", cfg.hidden_dim, &layer.ln2_g, &layer.ln2_b);
      e.layers_.push_back(layer);
    }
    return e;
  }

  const EncoderConfig& config() const { return cfg_; }
  bool has_adapters() const { return adapter_cfg_.has_value(); }
  const std::optional<AdapterConfig>& adapter_config() const { return adapter_cfg_; }
  int token_embedding_id() const { return tok_emb_; }

  // Adds two bottleneck adapters per layer (down -> GELU -> up, residual).
  // Up projections start at zero, so outputs are unchanged at insertion.
  void insert_adapters(ParamStore<S>& store, const AdapterConfig& acfg, Rng& rng) {
    require(!has_adapters(), "adapters already present");
    acfg.validate(cfg_);
    const int bd = acfg.bottleneck_dim;
    auto add_adapter = [&](const std::string& stem, int* dw, int* db, int* uw,
                           int* ub) {
      *dw = store.add(stem + ".down_w", ParamGroup::kAdapter, cfg_.hidden_dim, bd);
      nn::fill_truncated_normal(store[*dw].value, rng, kInitStd);
      *db = store.add(stem + ".down_b", ParamGroup::kAdapter, 1, bd);
      *uw = store.add(stem + ".up_w", ParamGroup::kAdapter, bd, cfg_.hidden_dim);
      *ub = store.add(stem + ".up_b", ParamGroup::kAdapter, 1, cfg_.hidden_dim);
    };
    for (size_t l = 0; l < layers_.size(); ++l) {
      const std::string p = "layer." + std::to_string(l) + ".";
      add_adapter(p + "adapter_attn", &layers_[l].attn_down_w,
                  &layers_[l].attn_down_b, &layers_[l].attn_up_w,
                  &layers_[l].attn_up_b);
      add_adapter(p + "adapter_ffn", &layers_[l].ffn_down_w,
                  &layers_[l].ffn_down_b, &layers_[l].ffn_up_w,
                  &layers_[l].ffn_up_b);
    }
    adapter_cfg_ = acfg;
  }

  // Forward pass over a uniform batch. In train mode dropout is driven by
  // rng; eval mode is deterministic. The trace holds every activation the
  // backward pass needs.
  void forward(const ParamStore<S>& store, const TokenBatch& batch,
               bool train_mode, Rng* rng, ForwardTrace<S>& t) const {
    const int B = batch.batch, T = batch.seq_len, H = cfg_.hidden_dim;
    require(T <= cfg_.max_seq_len, "sequence length ", T,
            " exceeds max_seq_len ", cfg_.max_seq_len);
    require(!train_mode || rng != nullptr || cfg_.dropout_rate == 0.0,
            "train-mode forward needs an rng when dropout is active");
    t.batch = B;
    t.seq_len = T;
    t.ids = batch.ids;
    t.mask = batch.mask;
    t.train_mode = train_mode;
    t.layers.assign(layers_.size(), LayerTrace<S>{});

    Mat<S> x(B * T, H);
    const Mat<S>& tok = store[tok_emb_].value;
    const Mat<S>& pos = store[pos_emb_].value;
    for (int b = 0; b < B; ++b)
      for (int s = 0; s < T; ++s) {
        const int r = b * T + s;
        const int32_t id = batch.ids[static_cast<size_t>(r)];
        require(id >= 0 && id < cfg_.vocab_size, "token id ", id, " out of range");
        x.row(r) = tok.row(id) + pos.row(s);
      }

    const bool drop = train_mode && cfg_.dropout_rate > 0.0;
    for (size_t l = 0; l < layers_.size(); ++l) {
      LayerTrace<S>& lt = t.layers[l];
      lt.x = std::move(x);
      forward_layer(store, layers_[l], batch, drop, rng, lt);
      x = lt.ln2_y;
    }
    t.output = std::move(x);
  }

  // Accumulates parameter gradients for d(loss)/d(output) and returns
  // nothing; embedding gradients land in the store like all others.
  void backward(ParamStore<S>& store, const ForwardTrace<S>& t,
                const Mat<S>& d_output) const {
    const int B = t.batch, T = t.seq_len;
    Mat<S> dx = d_output;
    for (size_t li = layers_.size(); li-- > 0;)
      backward_layer(store, layers_[li], t, t.layers[li], dx);

    Mat<S>& dtok = store[tok_emb_].grad;
    Mat<S>& dpos = store[pos_emb_].grad;
    for (int b = 0; b < B; ++b)
      for (int s = 0; s < T; ++s) {
        const int r = b * T + s;
        dtok.row(t.ids[static_cast<size_t>(r)]) += dx.row(r);
        dpos.row(s) += dx.row(r);
      }
  }

  // Pooled per-sequence representations, (B x H).
  static Mat<S> pool(const ForwardTrace<S>& t, PoolStrategy strategy) {
    const int B = t.batch, T = t.seq_len;
    const int H = static_cast<int>(t.output.cols());
    Mat<S> pooled(B, H);
    for (int b = 0; b < B; ++b) {
      if (strategy == PoolStrategy::kCls) {
        pooled.row(b) = t.output.row(b * T);
      } else {
        int n = 0;
        pooled.row(b).setZero();
        for (int s = 0; s < T; ++s)
          if (t.mask[static_cast<size_t>(b * T + s)]) {
            pooled.row(b) += t.output.row(b * T + s);
            ++n;
          }
        require(n > 0, "mean pooling over an all-pad sequence");
        pooled.row(b) /= S(n);
      }
    }
    return pooled;
  }

  static void pool_backward(const ForwardTrace<S>& t, PoolStrategy strategy,
                            const Mat<S>& d_pooled, Mat<S>& d_output) {
    const int B = t.batch, T = t.seq_len;
    d_output.setZero(t.output.rows(), t.output.cols());
    for (int b = 0; b < B; ++b) {
      if (strategy == PoolStrategy::kCls) {
        d_output.row(b * T) = d_pooled.row(b);
      } else {
        int n = 0;
        for (int s = 0; s < T; ++s)
          if (t.mask[static_cast<size_t>(b * T + s)]) ++n;
        for (int s = 0; s < T; ++s)
          if (t.mask[static_cast<size_t>(b * T + s)])
            d_output.row(b * T + s) = d_pooled.row(b) / S(n);
      }
    }
  }

  const std::vector<Layer>& layers() const { return layers_; }

 private:
  void forward_layer(const ParamStore<S>& store, const Layer& L,
                     const TokenBatch& batch, bool drop, Rng* rng,
                     LayerTrace<S>& lt) const {
    const int B = batch.batch, T = batch.seq_len, H = cfg_.hidden_dim;
    const int A = cfg_.num_heads, dh = cfg_.head_dim();
    const S scale = S(1) / std::sqrt(S(dh));
    const S neg_inf = -std::numeric_limits<S>::infinity();

    nn::linear_forward(lt.x, store[L.wq].value, store[L.bq].value, lt.q);
    nn::linear_forward(lt.x, store[L.wk].value, store[L.bk].value, lt.k);
    nn::linear_forward(lt.x, store[L.wv].value, store[L.bv].value, lt.v);

    lt.attn.resize(static_cast<Eigen::Index>(B) * A * T, T);
    lt.ctx.resize(static_cast<Eigen::Index>(B) * T, H);
    for (int b = 0; b < B; ++b) {
      for (int a = 0; a < A; ++a) {
        auto qb = lt.q.block(b * T, a * dh, T, dh);
        auto kb = lt.k.block(b * T, a * dh, T, dh);
        auto vb = lt.v.block(b * T, a * dh, T, dh);
        auto probs = lt.attn.block((b * A + a) * T, 0, T, T);
        probs.noalias() = qb * kb.transpose();
        probs *= scale;
        for (int s = 0; s < T; ++s)
          if (!batch.mask[static_cast<size_t>(b * T + s)])
            probs.col(s).setConstant(neg_inf);
        // row-wise softmax; CLS is never padded so each row has a finite max
        for (int r = 0; r < T; ++r) {
          const S m = probs.row(r).maxCoeff();
          probs.row(r) = (probs.row(r).array() - m).exp();
          probs.row(r) /= probs.row(r).sum();
        }
      }
    }
    const Mat<S>* probs_used = &lt.attn;
    Mat<S> dropped_probs;
    if (drop) {
      lt.attn_drop.resize(lt.attn.rows(), lt.attn.cols());
      nn::fill_dropout_mask(lt.attn_drop, *rng, cfg_.dropout_rate);
      dropped_probs = lt.attn.cwiseProduct(lt.attn_drop);
      probs_used = &dropped_probs;
    }
    for (int b = 0; b < B; ++b)
      for (int a = 0; a < A; ++a) {
        auto vb = lt.v.block(b * T, a * dh, T, dh);
        lt.ctx.block(b * T, a * dh, T, dh).noalias() =
            probs_used->block((b * A + a) * T, 0, T, T) * vb;
      }

    nn::linear_forward(lt.ctx, store[L.wo].value, store[L.bo].value, lt.attn_z);
    if (drop) {
      lt.attn_out_drop.resize(lt.attn_z.rows(), lt.attn_z.cols());
      nn::fill_dropout_mask(lt.attn_out_drop, *rng, cfg_.dropout_rate);
      lt.attn_z = lt.attn_z.cwiseProduct(lt.attn_out_drop);
    }
    Mat<S> sub1 = lt.attn_z;
    if (L.attn_down_w >= 0)
      apply_adapter(store, L.attn_down_w, L.attn_down_b, L.attn_up_w,
                    L.attn_up_b, lt.attn_z, lt.attn_ad_pre, lt.attn_ad_act, sub1);

    Mat<S> s1 = lt.x + sub1;
    nn::layer_norm_forward(s1, store[L.ln1_g].value, store[L.ln1_b].value, lt.y1,
                           lt.ln1_xhat, lt.ln1_rstd);

    nn::linear_forward(lt.y1, store[L.w1].value, store[L.b1].value, lt.ffn_pre);
    lt.ffn_act = lt.ffn_pre.unaryExpr([](S x) { return nn::gelu(x); });
    nn::linear_forward(lt.ffn_act, store[L.w2].value, store[L.b2].value, lt.ffn_z);
    if (drop) {
      lt.ffn_out_drop.resize(lt.ffn_z.rows(), lt.ffn_z.cols());
      nn::fill_dropout_mask(lt.ffn_out_drop, *rng, cfg_.dropout_rate);
      lt.ffn_z = lt.ffn_z.cwiseProduct(lt.ffn_out_drop);
    }
    Mat<S> sub2 = lt.ffn_z;
    if (L.ffn_down_w >= 0)
      apply_adapter(store, L.ffn_down_w, L.ffn_down_b, L.ffn_up_w, L.ffn_up_b,
                    lt.ffn_z, lt.ffn_ad_pre, lt.ffn_ad_act, sub2);

    Mat<S> s2 = lt.y1 + sub2;
    nn::layer_norm_forward(s2, store[L.ln2_g].value, store[L.ln2_b].value,
                           lt.ln2_y, lt.ln2_xhat, lt.ln2_rstd);
  }

  static void apply_adapter(const ParamStore<S>& store, int dw, int db, int uw,
                            int ub, const Mat<S>& z, Mat<S>& pre, Mat<S>& act,
                            Mat<S>& out) {
    nn::linear_forward(z, store[dw].value, store[db].value, pre);
    act = pre.unaryExpr([](S x) { return nn::gelu(x); });
    Mat<S> up;
    nn::linear_forward(act, store[uw].value, store[ub].value, up);
    out = z + up;
  }

  void backward_layer(ParamStore<S>& store, const Layer& L,
                      const ForwardTrace<S>& t, const LayerTrace<S>& lt,
                      Mat<S>& dx_out) const {
    const int B = t.batch, T = t.seq_len, H = cfg_.hidden_dim;
    const int A = cfg_.num_heads, dh = cfg_.head_dim();
    const S scale = S(1) / std::sqrt(S(dh));
    const Mat<S>& dy2 = dx_out;

    // LN2
    Mat<S> ds2;
    nn::layer_norm_backward(lt.ln2_xhat, lt.ln2_rstd, store[L.ln2_g].value, dy2,
                            store[L.ln2_g].grad, store[L.ln2_b].grad, ds2);
    Mat<S> dy1 = ds2;  // residual branch
    Mat<S> dz2 = ds2;  // sublayer branch (through adapter if present)
    if (L.ffn_down_w >= 0)
      adapter_backward(store, L.ffn_down_w, L.ffn_down_b, L.ffn_up_w, L.ffn_up_b,
                       lt.ffn_z, lt.ffn_ad_pre, lt.ffn_ad_act, ds2, dz2);
    if (lt.ffn_out_drop.size() > 0) dz2 = dz2.cwiseProduct(lt.ffn_out_drop);

    // FFN
    Mat<S> dact = Mat<S>::Zero(lt.ffn_act.rows(), lt.ffn_act.cols());
    nn::linear_backward(lt.ffn_act, store[L.w2].value, dz2, store[L.w2].grad,
                        store[L.b2].grad, &dact);
    Mat<S> dpre =
        dact.cwiseProduct(lt.ffn_pre.unaryExpr([](S x) { return nn::gelu_grad(x); }));
    nn::linear_backward(lt.y1, store[L.w1].value, dpre, store[L.w1].grad,
                        store[L.b1].grad, &dy1);

    // LN1
    Mat<S> ds1;
    nn::layer_norm_backward(lt.ln1_xhat, lt.ln1_rstd, store[L.ln1_g].value, dy1,
                            store[L.ln1_g].grad, store[L.ln1_b].grad, ds1);
    Mat<S> dx = ds1;   // residual branch
    Mat<S> dz1 = ds1;  // attention sublayer branch
    if (L.attn_down_w >= 0)
      adapter_backward(store, L.attn_down_w, L.attn_down_b, L.attn_up_w,
                       L.attn_up_b, lt.attn_z, lt.attn_ad_pre, lt.attn_ad_act,
                       ds1, dz1);
    if (lt.attn_out_drop.size() > 0) dz1 = dz1.cwiseProduct(lt.attn_out_drop);

    Mat<S> dctx = Mat<S>::Zero(lt.ctx.rows(), lt.ctx.cols());
    nn::linear_backward(lt.ctx, store[L.wo].value, dz1, store[L.wo].grad,
                        store[L.bo].grad, &dctx);

    Mat<S> dq = Mat<S>::Zero(B * T, H), dk = Mat<S>::Zero(B * T, H),
           dv = Mat<S>::Zero(B * T, H);
    const bool attn_dropped = lt.attn_drop.size() > 0;
    for (int b = 0; b < B; ++b)
      for (int a = 0; a < A; ++a) {
        auto probs = lt.attn.block((b * A + a) * T, 0, T, T);
        auto qb = lt.q.block(b * T, a * dh, T, dh);
        auto kb = lt.k.block(b * T, a * dh, T, dh);
        auto vb = lt.v.block(b * T, a * dh, T, dh);
        auto dctx_b = dctx.block(b * T, a * dh, T, dh);

        Mat<S> probs_used = probs;
        if (attn_dropped)
          probs_used =
              probs.cwiseProduct(lt.attn_drop.block((b * A + a) * T, 0, T, T));
        dv.block(b * T, a * dh, T, dh).noalias() +=
            probs_used.transpose() * dctx_b;
        Mat<S> dprobs = dctx_b * vb.transpose();
        if (attn_dropped)
          dprobs = dprobs.cwiseProduct(lt.attn_drop.block((b * A + a) * T, 0, T, T));
        // softmax backward; padded keys have prob 0, so their grads vanish
        Mat<S> dscores(T, T);
        for (int r = 0; r < T; ++r) {
          const S dot = dprobs.row(r).cwiseProduct(probs.row(r)).sum();
          dscores.row(r) =
              probs.row(r).cwiseProduct(dprobs.row(r) - Mat<S>::Constant(1, T, dot));
        }
        dscores *= scale;
        dq.block(b * T, a * dh, T, dh).noalias() += dscores * kb;
        dk.block(b * T, a * dh, T, dh).noalias() += dscores.transpose() * qb;
      }

    Mat<S> dx_in = std::move(dx);
    nn::linear_backward(lt.x, store[L.wq].value, dq, store[L.wq].grad,
                        store[L.bq].grad, &dx_in);
    nn::linear_backward(lt.x, store[L.wk].value, dk, store[L.wk].grad,
                        store[L.bk].grad, &dx_in);
    nn::linear_backward(lt.x, store[L.wv].value, dv, store[L.wv].grad,
                        store[L.bv].grad, &dx_in);
    dx_out = std::move(dx_in);
  }

  // dz accumulates the gradient at the adapter input given d(out) where
  // out = z + up(gelu(down(z))).
  static void adapter_backward(ParamStore<S>& store, int dw, int db, int uw,
                               int ub, const Mat<S>& z, const Mat<S>& pre,
                               const Mat<S>& act, const Mat<S>& dout, Mat<S>& dz) {
    Mat<S> dact = Mat<S>::Zero(act.rows(), act.cols());
    nn::linear_backward(act, store[uw].value, dout, store[uw].grad,
                        store[ub].grad, &dact);
    Mat<S> dpre =
        dact.cwiseProduct(pre.unaryExpr([](S x) { return nn::gelu_grad(x); }));
    nn::linear_backward(z, store[dw].value, dpre, store[dw].grad, store[db].grad,
                        &dz);
  }

  EncoderConfig cfg_;
  std::optional<AdapterConfig> adapter_cfg_;
  int tok_emb_ = -1, pos_emb_ = -1;
  std::vector<Layer> layers_;
};

}  // namespace dapt
