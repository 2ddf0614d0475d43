#pragma once

#include <cmath>

#include "dapt/rng.hpp"
#include "dapt/tensor.hpp"

// Shared forward/backward primitives for the encoder and heads. All
// backward functions are exact derivatives of the matching forward, which is
// what the finite-difference oracle checks.
namespace dapt::nn {

inline constexpr double kLayerNormEps = 1e-5;

template <class S>
S gelu(S x) {
  return S(0.5) * x * (S(1) + std::erf(x * S(0.7071067811865475)));
}

template <class S>
S gelu_grad(S x) {
  const S cdf = S(0.5) * (S(1) + std::erf(x * S(0.7071067811865475)));
  const S pdf = S(0.3989422804014327) * std::exp(S(-0.5) * x * x);
  return cdf + x * pdf;
}

template <class S>
void fill_truncated_normal(Mat<S>& m, Rng& rng, double stddev) {
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m.data()[i] = static_cast<S>(rng.truncated_normal(stddev));
}

// y = x * W + b (b is 1 x cols).
template <class S>
void linear_forward(const Mat<S>& x, const Mat<S>& w, const Mat<S>& b, Mat<S>& y) {
  y.noalias() = x * w;
  y.rowwise() += b.row(0);
}

// Accumulates dW, db and (optionally) dX for y = x * W + b.
template <class S>
void linear_backward(const Mat<S>& x, const Mat<S>& w, const Mat<S>& dy,
                     Mat<S>& dw, Mat<S>& db, Mat<S>* dx) {
  dw.noalias() += x.transpose() * dy;
  db.row(0) += dy.colwise().sum();
  if (dx) dx->noalias() += dy * w.transpose();
}

// Row-wise layer norm. Stashes xhat and rstd for the backward pass.
template <class S>
void layer_norm_forward(const Mat<S>& x, const Mat<S>& gamma, const Mat<S>& beta,
                        Mat<S>& y, Mat<S>& xhat, Vec<S>& rstd) {
  const Eigen::Index rows = x.rows(), cols = x.cols();
  xhat.resize(rows, cols);
  rstd.resize(rows);
  y.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const S mean = x.row(r).mean();
    const S var = (x.row(r).array() - mean).square().sum() / S(cols);
    const S rs = S(1) / std::sqrt(var + S(kLayerNormEps));
    rstd[r] = rs;
    xhat.row(r) = (x.row(r).array() - mean) * rs;
    y.row(r) = xhat.row(r).cwiseProduct(gamma.row(0)) + beta.row(0);
  }
}

template <class S>
void layer_norm_backward(const Mat<S>& xhat, const Vec<S>& rstd,
                         const Mat<S>& gamma, const Mat<S>& dy, Mat<S>& dgamma,
                         Mat<S>& dbeta, Mat<S>& dx) {
  const Eigen::Index rows = xhat.rows(), cols = xhat.cols();
  dgamma.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
  dbeta.row(0) += dy.colwise().sum();
  dx.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto dxhat = (dy.row(r).array() * gamma.row(0).array()).eval();
    const S m1 = dxhat.sum() / S(cols);
    const S m2 = (dxhat * xhat.row(r).array()).sum() / S(cols);
    dx.row(r) =
        ((dxhat - m1 - xhat.row(r).array() * m2) * rstd[r]).matrix();
  }
}

// Inverted dropout: mask entries are 0 or 1/(1-rate).
template <class S>
void fill_dropout_mask(Mat<S>& mask, Rng& rng, double rate) {
  const S keep_scale = static_cast<S>(1.0 / (1.0 - rate));
  for (Eigen::Index i = 0; i < mask.size(); ++i)
    mask.data()[i] = rng.uniform() < rate ? S(0) : keep_scale;
}

}  // namespace dapt::nn
