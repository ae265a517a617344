#pragma once

// Training orchestration. Local mode runs the plaintext reference models;
// framework mode drives the same update rules through the party network:
// inputs and parameters live as additive shares on P0/P1, multiplications
// spend dealer triples, the sigmoid goes through the permuted helper, and
// (for the split network) the tail trains its own layers. Both modes draw
// initialization and batch order from the same seed streams, so their
// curves differ only by secret-sharing round-off.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "psh/coordinator.hpp"
#include "psh/dataset.hpp"
#include "psh/model.hpp"
#include "psh/train_tags.hpp"

namespace psh {

struct RunRecord {
  std::size_t batch = 0;
  double elapsed_s = 0.0;
  double val_accuracy = 0.0;
  double loss = 0.0;
  std::string mode;
};

struct TrainOptions {
  std::string model = "logistic";  // logistic | dnn
  std::string mode = "local";      // local | framework
  std::size_t steps = 1000;
  std::uint64_t seed = 1;
  std::size_t batch_size = 32;
  double lr = 0.1;
  std::size_t hidden = 64;
  std::size_t checkpoint_every = 100;
  double mask_bound = kDefaultMaskBound;
  // Framework backend: when set, drive these (already connected) parties,
  // e.g. socket processes; when null, spin up in-process nodes.
  Coordinator* coord = nullptr;
  // When set, the first-layer weights are appended after every step
  // (reconstructed from the parties in framework mode). Test hook for
  // backend-equivalence checks; leave null in normal runs.
  std::vector<Tensor>* trajectory = nullptr;
};

namespace detail {

struct Stopwatch {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  }
};

inline std::vector<std::size_t> sample_batch(const Dataset& ds, Rng& rng,
                                             std::size_t batch_size) {
  std::vector<std::size_t> rows(batch_size);
  for (auto& r : rows) r = ds.train_idx[rng.below(ds.train_idx.size())];
  return rows;
}

inline bool checkpoint_due(std::size_t batch_no, const TrainOptions& opt) {
  return batch_no % opt.checkpoint_every == 0 || batch_no == opt.steps;
}

inline std::string ks(const char* tag, std::uint64_t v) {
  return std::string(" ") + tag + ":" + std::to_string(v);
}

inline std::string fs(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, " f:%.17g", v);
  return buf;
}

}  // namespace detail

// --- local mode ---------------------------------------------------------------

inline std::vector<RunRecord> train_logistic_local(const Dataset& ds,
                                                   const TrainOptions& opt) {
  Rng init_rng = Rng::derive(opt.seed, kTagLogisticInit);
  LogisticModel m = LogisticModel::init(ds.dim(), ds.classes(), init_rng);
  Rng batch_rng = Rng::derive(opt.seed, kTagBatches);
  const Tensor vx = ds.gather_images(ds.val_idx);
  const Tensor vy = ds.gather_labels(ds.val_idx);

  std::vector<RunRecord> records;
  detail::Stopwatch watch;
  for (std::size_t t = 0; t < opt.steps; ++t) {
    const auto rows = detail::sample_batch(ds, batch_rng, opt.batch_size);
    m.sgd_step(ds.gather_images(rows), ds.gather_labels(rows), opt.lr);
    if (opt.trajectory) opt.trajectory->push_back(m.W);
    const std::size_t bn = t + 1;
    if (detail::checkpoint_due(bn, opt)) {
      const Tensor yhat = m.predict(vx);
      records.push_back({bn, watch.seconds(), accuracy(yhat, vy),
                         mse_loss(yhat, vy), opt.mode});
    }
  }
  return records;
}

inline std::vector<RunRecord> train_dnn_local(const Dataset& ds,
                                              const TrainOptions& opt) {
  Rng head_rng = Rng::derive(opt.seed, kTagHeadInit);
  Rng tail_rng = Rng::derive(opt.seed, kTagTailInit);
  MlpModel m =
      MlpModel::init(ds.dim(), opt.hidden, ds.classes(), head_rng, tail_rng);
  Rng batch_rng = Rng::derive(opt.seed, kTagBatches);
  const Tensor vx = ds.gather_images(ds.val_idx);
  const Tensor vy = ds.gather_labels(ds.val_idx);

  std::vector<RunRecord> records;
  detail::Stopwatch watch;
  for (std::size_t t = 0; t < opt.steps; ++t) {
    const auto rows = detail::sample_batch(ds, batch_rng, opt.batch_size);
    m.sgd_step(ds.gather_images(rows), ds.gather_labels(rows), opt.lr);
    if (opt.trajectory) opt.trajectory->push_back(m.W1);
    const std::size_t bn = t + 1;
    if (detail::checkpoint_due(bn, opt)) {
      const Tensor yhat = m.predict(vx);
      records.push_back({bn, watch.seconds(), accuracy(yhat, vy),
                         cross_entropy_loss(yhat, vy), opt.mode});
    }
  }
  return records;
}

// --- framework mode -------------------------------------------------------------

inline std::vector<RunRecord> train_logistic_framework(const Dataset& ds,
                                                       const TrainOptions& opt) {
  std::optional<LocalDeployment> dep;
  Coordinator* C = opt.coord;
  if (!C) {
    dep.emplace(opt.seed, opt.mask_bound);
    C = &dep->coord();
  }

  const std::size_t d = ds.dim(), c = ds.classes(), n = opt.batch_size;
  Rng init_rng = Rng::derive(opt.seed, kTagLogisticInit);
  const LogisticModel init = LogisticModel::init(d, c, init_rng);
  const auto kW = C->share_store(init.W);
  const auto kb = C->share_store(init.b);
  Rng batch_rng = Rng::derive(opt.seed, kTagBatches);
  const Tensor vx = ds.gather_images(ds.val_idx);
  const Tensor vy = ds.gather_labels(ds.val_idx);

  const auto P0 = NodeRole::P0, P1 = NodeRole::P1, P3 = NodeRole::P3;
  std::vector<RunRecord> records;
  detail::Stopwatch watch;
  for (std::size_t t = 0; t < opt.steps; ++t) {
    const auto rows = detail::sample_batch(ds, batch_rng, opt.batch_size);
    const auto kx = C->share_store(ds.gather_images(rows));
    const auto ky = C->share_store(ds.gather_labels(rows));
    const std::uint64_t r0 = 4 * t, r1 = 4 * t + 1, r2 = 4 * t + 2,
                        r3 = 4 * t + 3;

    // z = xW + b
    C->triple_req(r0, MulKind::Matmul, {n, d}, {d, c});
    auto mk_z = [&](std::uint64_t x, std::uint64_t w, std::uint64_t b) {
      return "(addrow (beaver_mul" + detail::ks("k", x) + detail::ks("k", w) +
             detail::ks("i", r0) + " s:mm)" + detail::ks("k", b) + ")";
    };
    const auto ez = C->parallel({{P0, mk_z(kx.k0, kW.k0, kb.k0)},
                                 {P1, mk_z(kx.k1, kW.k1, kb.k1)}});
    const Coordinator::KeyPair kz{ez[0].key_or_throw(), ez[1].key_or_throw()};

    // yhat = sigmoid(z), plus sigmoid' for the backward pass
    auto mk_eval = [&](std::uint64_t z) {
      return "(eval_nl" + detail::ks("k", z) + " s:sigmoid" +
             detail::ks("i", r1) + " i:1)";
    };
    const auto ee = C->parallel({{P0, mk_eval(kz.k0)},
                                 {P1, mk_eval(kz.k1)},
                                 {P3, "(p3_serve" + detail::ks("i", r1) + ")"}});
    const Coordinator::KeyPair kyh{ee[0].key_or_throw(), ee[1].key_or_throw()};
    const Coordinator::KeyPair kfp{ee[0].key2.value(), ee[1].key2.value()};

    // dz = (2/n)(yhat - y) * sigmoid'(z)
    C->triple_req(r2, MulKind::Elementwise, {n, c}, {n, c});
    auto mk_dz = [&](std::uint64_t yh, std::uint64_t y, std::uint64_t fp) {
      return "(beaver_mul (scale (sub" + detail::ks("k", yh) +
             detail::ks("k", y) + ")" + detail::fs(2.0 / double(n)) + ")" +
             detail::ks("k", fp) + detail::ks("i", r2) + " s:ew)";
    };
    const auto edz = C->parallel({{P0, mk_dz(kyh.k0, ky.k0, kfp.k0)},
                                  {P1, mk_dz(kyh.k1, ky.k1, kfp.k1)}});
    const Coordinator::KeyPair kdz{edz[0].key_or_throw(), edz[1].key_or_throw()};

    // dW = x^T dz
    C->triple_req(r3, MulKind::Matmul, {d, n}, {n, c});
    auto mk_dw = [&](std::uint64_t x, std::uint64_t dz) {
      return "(beaver_mul (transpose" + detail::ks("k", x) + ")" +
             detail::ks("k", dz) + detail::ks("i", r3) + " s:mm)";
    };
    const auto edw = C->parallel({{P0, mk_dw(kx.k0, kdz.k0)},
                                  {P1, mk_dw(kx.k1, kdz.k1)}});
    const Coordinator::KeyPair kdw{edw[0].key_or_throw(), edw[1].key_or_throw()};

    // W -= lr dW ; b -= lr colsum(dz)
    auto mk_sgdw = [&](std::uint64_t w, std::uint64_t dw) {
      return "(sgd" + detail::ks("k", w) + detail::fs(opt.lr) +
             detail::ks("k", dw) + ")";
    };
    auto mk_sgdb = [&](std::uint64_t b, std::uint64_t dz) {
      return "(sgd" + detail::ks("k", b) + detail::fs(opt.lr) + " (colsum" +
             detail::ks("k", dz) + "))";
    };
    C->parallel({{P0, mk_sgdw(kW.k0, kdw.k0)},
                 {P1, mk_sgdw(kW.k1, kdw.k1)},
                 {P0, mk_sgdb(kb.k0, kdz.k0)},
                 {P1, mk_sgdb(kb.k1, kdz.k1)}});

    for (const auto& kp : {kx, ky, kz, kyh, kfp, kdz, kdw}) C->free_pair(kp);
    if (opt.trajectory) opt.trajectory->push_back(C->reconstruct_fetch(kW));

    const std::size_t bn = t + 1;
    if (detail::checkpoint_due(bn, opt)) {
      const LogisticModel snap{C->reconstruct_fetch(kW),
                               C->reconstruct_fetch(kb)};
      const Tensor yhat = snap.predict(vx);
      records.push_back({bn, watch.seconds(), accuracy(yhat, vy),
                         mse_loss(yhat, vy), opt.mode});
    }
  }
  return records;
}

inline std::vector<RunRecord> train_dnn_framework(const Dataset& ds,
                                                  const TrainOptions& opt) {
  std::optional<LocalDeployment> dep;
  Coordinator* C = opt.coord;
  if (!C) {
    dep.emplace(opt.seed, opt.mask_bound);
    C = &dep->coord();
  }

  const std::size_t d = ds.dim(), c = ds.classes(), n = opt.batch_size;
  const std::size_t h = opt.hidden;
  Rng head_rng = Rng::derive(opt.seed, kTagHeadInit);
  auto [W1, b1] = init_dense(d, h, head_rng);
  const auto kW1 = C->share_store(W1);
  const auto kb1 = C->share_store(b1);
  C->exec(NodeRole::Tail, "(tail_init" + detail::ks("i", h) +
                              detail::ks("i", c) + detail::fs(opt.lr) +
                              " s:ce" + detail::ks("i", kTagTailInit) + ")");

  Rng batch_rng = Rng::derive(opt.seed, kTagBatches);
  const Tensor vx = ds.gather_images(ds.val_idx);
  const Tensor vy = ds.gather_labels(ds.val_idx);

  const auto P0 = NodeRole::P0, P1 = NodeRole::P1;
  std::vector<RunRecord> records;
  detail::Stopwatch watch;
  for (std::size_t t = 0; t < opt.steps; ++t) {
    const auto rows = detail::sample_batch(ds, batch_rng, opt.batch_size);
    const auto kx = C->share_store(ds.gather_images(rows));
    const Tensor y = ds.gather_labels(rows);
    const std::uint64_t r0 = 2 * t, r1 = 2 * t + 1;

    C->triple_req(r0, MulKind::Matmul, {n, d}, {d, h});
    C->triple_req(r1, MulKind::Matmul, {d, n}, {n, h});

    auto mk_fwd = [&](std::uint64_t x, std::uint64_t w, std::uint64_t b) {
      return "(head_fwd" + detail::ks("k", x) + detail::ks("k", w) +
             detail::ks("k", b) + detail::ks("i", r0) + ")";
    };
    Expr step = make_expr("tail_step", Arg::of_int(std::int64_t(r0)),
                          Arg::of_tensor(y));
    const auto ef = C->parallel({{P0, mk_fwd(kx.k0, kW1.k0, kb1.k0)},
                                 {P1, mk_fwd(kx.k1, kW1.k1, kb1.k1)},
                                 {NodeRole::Tail, print_expr(step)}});
    const Coordinator::KeyPair kz{ef[0].key_or_throw(), ef[1].key_or_throw()};

    auto mk_bwd = [&](std::uint64_t x, std::uint64_t w, std::uint64_t b) {
      return "(head_bwd" + detail::ks("k", x) + detail::ks("k", w) +
             detail::ks("k", b) + detail::ks("i", r0) + detail::ks("i", r1) +
             detail::fs(opt.lr) + ")";
    };
    C->parallel({{P0, mk_bwd(kx.k0, kW1.k0, kb1.k0)},
                 {P1, mk_bwd(kx.k1, kW1.k1, kb1.k1)}});

    C->free_pair(kx);
    C->free_pair(kz);
    if (opt.trajectory) opt.trajectory->push_back(C->reconstruct_fetch(kW1));

    const std::size_t bn = t + 1;
    if (detail::checkpoint_due(bn, opt)) {
      MlpModel snap;
      snap.W1 = C->reconstruct_fetch(kW1);
      snap.b1 = C->reconstruct_fetch(kb1);
      const ExecResult p = C->exec(NodeRole::Tail, "(tail_params)");
      snap.W2 = C->fetch(NodeRole::Tail, p.key_or_throw());
      snap.b2 = C->fetch(NodeRole::Tail, p.key2.value());
      C->free(NodeRole::Tail, p.key_or_throw());
      C->free(NodeRole::Tail, p.key2.value());
      const Tensor yhat = snap.predict(vx);
      records.push_back({bn, watch.seconds(), accuracy(yhat, vy),
                         cross_entropy_loss(yhat, vy), opt.mode});
    }
  }
  return records;
}

// --- entry point -----------------------------------------------------------------

inline std::vector<RunRecord> train_run(const Dataset& ds,
                                        const TrainOptions& opt) {
  if (ds.train_idx.empty() || ds.val_idx.empty())
    throw DatasetError("dataset has no train/validation split");
  if (opt.mode != "framework" && opt.mode != "local")
    throw std::invalid_argument("unknown mode: " + opt.mode);
  if (opt.model == "logistic")
    return opt.mode == "framework" ? train_logistic_framework(ds, opt)
                                   : train_logistic_local(ds, opt);
  if (opt.model == "dnn")
    return opt.mode == "framework" ? train_dnn_framework(ds, opt)
                                   : train_dnn_local(ds, opt);
  throw std::invalid_argument("unknown model: " + opt.model);
}

}  // namespace psh
