#pragma once

// Plaintext reference models. Local-mode training and the validation done
// at checkpoints both use these; the framework mode computes the identical
// update rules under sharing, so the two curves should sit on top of each
// other up to secret-sharing round-off.

#include <cstdint>

#include "psh/nonlinear.hpp"
#include "psh/rng.hpp"
#include "psh/split.hpp"
#include "psh/tensor.hpp"

namespace psh {

// argmax agreement between prediction rows and one-hot label rows
inline double accuracy(const Tensor& yhat, const Tensor& labels) {
  detail::require_same_shape(yhat, labels, "accuracy");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < yhat.rows(); ++i) {
    std::size_t best = 0, truth = 0;
    for (std::size_t c = 1; c < yhat.cols(); ++c) {
      if (yhat.at(i, c) > yhat.at(i, best)) best = c;
      if (labels.at(i, c) > labels.at(i, truth)) truth = c;
    }
    hits += best == truth;
  }
  return double(hits) / double(yhat.rows());
}

// y = sigmoid(xW + b), squared loss (batch mean, summed over outputs).
struct LogisticModel {
  Tensor W, b;

  static LogisticModel init(std::size_t d, std::size_t c, Rng& rng) {
    auto [W, b] = init_dense(d, c, rng);
    return {std::move(W), std::move(b)};
  }

  Tensor predict(const Tensor& x) const {
    return apply_fn(NonlinearFn::Sigmoid, add_rowbias(matmul(x, W), b));
  }

  // dL/dz = (2/n) (yhat - y) * s'(z)
  void sgd_step(const Tensor& x, const Tensor& y, double lr) {
    const std::size_t n = x.rows();
    const Tensor z = add_rowbias(matmul(x, W), b);
    const Tensor yhat = apply_fn(NonlinearFn::Sigmoid, z);
    const Tensor dz = mul(scale(sub(yhat, y), 2.0 / double(n)),
                          apply_fn(NonlinearFn::SigmoidPrime, z));
    W = add_scaled(W, -lr, matmul(transpose(x), dz));
    b = add_scaled(b, -lr, colsum(dz));
  }

  double loss(const Tensor& x, const Tensor& y) const {
    return mse_loss(predict(x), y);
  }
};

// sigmoid hidden layer, sigmoid output, per-class binary cross entropy.
// Mirrors the split setup: W1/b1 is the head layer, W2/b2 the tail.
struct MlpModel {
  Tensor W1, b1, W2, b2;

  static MlpModel init(std::size_t d, std::size_t h, std::size_t c,
                       Rng& head_rng, Rng& tail_rng) {
    MlpModel m;
    auto [w1, bb1] = init_dense(d, h, head_rng);
    auto [w2, bb2] = init_dense(h, c, tail_rng);
    m.W1 = std::move(w1);
    m.b1 = std::move(bb1);
    m.W2 = std::move(w2);
    m.b2 = std::move(bb2);
    return m;
  }

  Tensor predict(const Tensor& x) const {
    const Tensor a =
        apply_fn(NonlinearFn::Sigmoid, add_rowbias(matmul(x, W1), b1));
    return apply_fn(NonlinearFn::Sigmoid, add_rowbias(matmul(a, W2), b2));
  }

  // Same gradients as the split protocol: dz2 = (yhat - y)/n, dz1 through
  // the sigmoid; all gradients are taken before any parameter moves.
  void sgd_step(const Tensor& x, const Tensor& y, double lr) {
    const std::size_t n = x.rows();
    const Tensor z1 = add_rowbias(matmul(x, W1), b1);
    const Tensor a = apply_fn(NonlinearFn::Sigmoid, z1);
    const Tensor z2 = add_rowbias(matmul(a, W2), b2);
    const Tensor yhat = apply_fn(NonlinearFn::Sigmoid, z2);

    const Tensor dz2 = scale(sub(yhat, y), 1.0 / double(n));
    const Tensor dW2 = matmul(transpose(a), dz2);
    const Tensor db2 = colsum(dz2);
    const Tensor dz1 = mul(matmul(dz2, transpose(W2)),
                           apply_fn(NonlinearFn::SigmoidPrime, z1));

    W2 = add_scaled(W2, -lr, dW2);
    b2 = add_scaled(b2, -lr, db2);
    W1 = add_scaled(W1, -lr, matmul(transpose(x), dz1));
    b1 = add_scaled(b1, -lr, colsum(dz1));
  }

  double loss(const Tensor& x, const Tensor& y) const {
    return cross_entropy_loss(predict(x), y);
  }
};

}  // namespace psh
