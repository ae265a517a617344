#pragma once

// Split learning: the first dense layer is computed under sharing, its
// pre-activation output is revealed to a tail party only, and the tail
// trains the upper layers, returning the hidden-layer gradient as fresh
// shares. Neither data holder ever sees the hidden output in plaintext,
// and the tail never sees the inputs or the head weights.

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "psh/channel.hpp"
#include "psh/nonlinear.hpp"
#include "psh/rng.hpp"
#include "psh/sharing.hpp"
#include "psh/tensor.hpp"

namespace psh {

// Uniform [-1/sqrt(d), 1/sqrt(d)] weight init, zero bias.
inline std::pair<Tensor, Tensor> init_dense(std::size_t d, std::size_t h,
                                            Rng& rng) {
  const double bound = 1.0 / std::sqrt(double(d));
  return {rng.uniform_tensor({d, h}, -bound, bound), Tensor({1, h})};
}

// One party's half of the head layer parameters.
struct HeadShare {
  ShareHandle W;  // d x h
  ShareHandle b;  // 1 x h
};

// z = xW + b under sharing; this party's z-share is pushed to the tail.
// The triple must be shaped for x (n x d) times W (d x h).
inline ShareHandle head_forward_party(Role role, Channel& peer, Channel& tail,
                                      const ShareHandle& x, const HeadShare& head,
                                      TripleHalf& triple, std::uint64_t round) {
  ShareHandle xw = beaver_mul(role, peer, x, head.W, triple, round);
  ShareHandle z{role, xw.value_id, add_rowbias(xw.share, head.b.share)};
  tail.send_tensor(Slot::Hidden, round, z.share);
  return z;
}

// --- tail party --------------------------------------------------------------

enum class LossKind : std::uint8_t { Mse, CrossEntropy };

// Mean over the batch, summed over output units.
inline double mse_loss(const Tensor& yhat, const Tensor& y) {
  detail::require_same_shape(yhat, y, "mse_loss");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = yhat[i] - y[i];
    s += d * d;
  }
  return s / double(y.rows());
}

// Per-class binary cross entropy with sigmoid outputs, summed over the
// classes, mean over the batch.
inline double cross_entropy_loss(const Tensor& yhat, const Tensor& y) {
  detail::require_same_shape(yhat, y, "cross_entropy_loss");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double p = std::clamp(yhat[i], 1e-12, 1.0 - 1e-12);
    s -= y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
  }
  return s / double(y.rows());
}

struct TailStep {
  double loss = 0.0;
  Tensor dz;  // dL/d(hidden pre-activation)
};

// The upper network: sigmoid on the received pre-activation, one dense
// layer, sigmoid output, loss head, plain SGD on its own parameters.
class TailNet {
 public:
  TailNet() = default;
  TailNet(std::size_t hidden, std::size_t out, double lr, LossKind loss,
          Rng& rng)
      : lr_(lr), loss_(loss) {
    auto [W, b] = init_dense(hidden, out, rng);
    W2_ = std::move(W);
    b2_ = std::move(b);
  }

  const Tensor& weights() const { return W2_; }
  const Tensor& bias() const { return b2_; }

  Tensor forward(const Tensor& z1) const {
    const Tensor a = apply_fn(NonlinearFn::Sigmoid, z1);
    return apply_fn(NonlinearFn::Sigmoid,
                    add_rowbias(matmul(a, W2_), b2_));
  }

  // Forward, loss, SGD update of the tail's own parameters, and the
  // gradient on the received pre-activation.
  TailStep step(const Tensor& z1, const Tensor& labels) {
    if (z1.rank() != 2 || z1.cols() != W2_.rows())
      throw ShapeError("tail: hidden width " + shape_str(z1.shape()) +
                       " does not match " + shape_str(W2_.shape()));
    const std::size_t n = z1.rows();
    const Tensor a = apply_fn(NonlinearFn::Sigmoid, z1);
    const Tensor z2 = add_rowbias(matmul(a, W2_), b2_);
    const Tensor yhat = apply_fn(NonlinearFn::Sigmoid, z2);

    TailStep out;
    out.loss = loss_ == LossKind::Mse ? mse_loss(yhat, labels)
                                      : cross_entropy_loss(yhat, labels);

    // dL/dz2: (yhat - y) * s'(z2) scaled for MSE, (yhat - y) for BCE;
    // both averaged over the batch.
    Tensor dz2 = sub(yhat, labels);
    if (loss_ == LossKind::Mse)
      dz2 = mul(scale(dz2, 2.0), apply_fn(NonlinearFn::SigmoidPrime, z2));
    dz2 = scale(dz2, 1.0 / double(n));

    const Tensor dW2 = matmul(transpose(a), dz2);
    const Tensor db2 = colsum(dz2);
    const Tensor da = matmul(dz2, transpose(W2_));
    out.dz = mul(da, apply_fn(NonlinearFn::SigmoidPrime, z1));

    W2_ = add_scaled(W2_, -lr_, dW2);
    b2_ = add_scaled(b2_, -lr_, db2);
    return out;
  }

 private:
  Tensor W2_, b2_;
  double lr_ = 0.1;
  LossKind loss_ = LossKind::CrossEntropy;
};

// Tail's serve step: collect the two hidden-layer halves, run the tail
// network, send the hidden gradient back as fresh shares. Labels are
// plaintext at the tail. Returns the loss.
inline double tail_round(Channel& to_p0, Channel& to_p1, std::uint64_t round,
                         TailNet& net, const Tensor& labels, Rng& round_rng,
                         double mask_bound = kDefaultMaskBound) {
  const Tensor z0 = to_p0.recv_tensor(Slot::Hidden, round);
  const Tensor z1 = to_p1.recv_tensor(Slot::Hidden, round);
  const Tensor z = add(z0, z1);
  TailStep st = net.step(z, labels);

  Tensor m = round_rng.uniform_tensor(st.dz.shape(), -mask_bound, mask_bound);
  to_p0.send_tensor(Slot::Grad, round, m);
  to_p1.send_tensor(Slot::Grad, round, sub(st.dz, m));
  return st.loss;
}

// Receive the hidden gradient share and update this party's head share:
// dW = x^T dz under sharing, db = column sums. The triple must be shaped
// for x^T (d x n) times dz (n x h). The gradient arrives under the forward
// round tag (grad_round); the multiplication uses its own round.
inline void head_backward_party(Role role, Channel& peer, Channel& tail,
                                const ShareHandle& x, HeadShare& head,
                                TripleHalf& triple, double lr,
                                std::uint64_t grad_round, std::uint64_t round) {
  Tensor dz = tail.recv_tensor(Slot::Grad, grad_round);
  ShareHandle xt{role, x.value_id, transpose(x.share)};
  ShareHandle dzh{role, x.value_id, std::move(dz)};
  ShareHandle dW = beaver_mul(role, peer, xt, dzh, triple, round);
  const Tensor db = colsum(dzh.share);
  head.W.share = add_scaled(head.W.share, -lr, dW.share);
  head.b.share = add_scaled(head.b.share, -lr, db);
}

// --- vertically partitioned variant ------------------------------------------

// Per-holder plaintext head over that holder's feature columns.
struct VerticalHead {
  Tensor W;  // d_k x h
  Tensor b;  // 1 x h
};

// Each holder computes its hidden output locally; the tail sums them.
inline Tensor vertical_head_forward(const std::vector<VerticalHead>& heads,
                                    const std::vector<Tensor>& x_parts) {
  if (heads.empty() || heads.size() != x_parts.size())
    throw ShapeError("vertical_head_forward: holder count mismatch");
  Tensor z = add_rowbias(matmul(x_parts[0], heads[0].W), heads[0].b);
  for (std::size_t k = 1; k < heads.size(); ++k)
    z = add(z, add_rowbias(matmul(x_parts[k], heads[k].W), heads[k].b));
  return z;
}

// Backward fan-out: the same dz reaches every holder.
inline void vertical_head_backward(std::vector<VerticalHead>& heads,
                                   const std::vector<Tensor>& x_parts,
                                   const Tensor& dz, double lr) {
  for (std::size_t k = 0; k < heads.size(); ++k) {
    heads[k].W = add_scaled(heads[k].W, -lr, matmul(transpose(x_parts[k]), dz));
    heads[k].b = add_scaled(heads[k].b, -lr, colsum(dz));
  }
}

}  // namespace psh
