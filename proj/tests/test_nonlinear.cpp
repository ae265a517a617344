#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "harness.hpp"

using namespace psh;
using namespace pshtest;

TEST_CASE("pointwise functions and derivatives", "[nonlinear]") {
  REQUIRE(apply_fn(NonlinearFn::Sigmoid, 0.0) == 0.5);
  REQUIRE(apply_fn(NonlinearFn::Sigmoid, 100.0) == Catch::Approx(1.0));
  REQUIRE(apply_fn(NonlinearFn::SigmoidPrime, 0.0) == 0.25);
  REQUIRE(apply_fn(NonlinearFn::Relu, -2.0) == 0.0);
  REQUIRE(apply_fn(NonlinearFn::Relu, 3.0) == 3.0);
  REQUIRE(apply_fn(NonlinearFn::ReluPrime, -2.0) == 0.0);
  REQUIRE(apply_fn(NonlinearFn::ReluPrime, 3.0) == 1.0);

  REQUIRE(fn_derivative(NonlinearFn::Sigmoid) == NonlinearFn::SigmoidPrime);
  REQUIRE(fn_derivative(NonlinearFn::Relu) == NonlinearFn::ReluPrime);
  for (int i = 0; i < 4; ++i)
    REQUIRE(fn_from_name(fn_name(NonlinearFn(i))) == NonlinearFn(i));

  // numeric: sigmoid' matches finite differences
  for (double z : {-3.0, -0.5, 0.0, 1.25, 4.0}) {
    const double eps = 1e-6;
    const double fd = (apply_fn(NonlinearFn::Sigmoid, z + eps) -
                       apply_fn(NonlinearFn::Sigmoid, z - eps)) /
                      (2 * eps);
    REQUIRE(apply_fn(NonlinearFn::SigmoidPrime, z) ==
            Catch::Approx(fd).margin(1e-9));
  }
}

TEST_CASE("helper round returns fresh shares of f", "[nonlinear]") {
  Rng rng(41);
  const Tensor x = rng.uniform_tensor({64}, -4.0, 4.0);
  auto [h0, h1] = share(x, rng);

  Rng round_rng(99);
  const P3Reply rep = p3_eval_round(h0.share, h1.share, NonlinearFn::Sigmoid,
                                    /*want_prime=*/true, round_rng);
  REQUIRE(rep.with_prime);
  REQUIRE(max_abs_diff(add(rep.fx0, rep.fx1),
                       apply_fn(NonlinearFn::Sigmoid, x)) < 1e-12);
  REQUIRE(max_abs_diff(add(rep.fpx0, rep.fpx1),
                       apply_fn(NonlinearFn::SigmoidPrime, x)) < 1e-12);
  // the share toward P0 is a pure mask, independent of f(x)
  for (std::size_t i = 0; i < rep.fx0.size(); ++i)
    REQUIRE(std::abs(rep.fx0[i]) <= kDefaultMaskBound);
}

TEST_CASE("full permuted evaluation equals local sigmoid", "[nonlinear]") {
  Rng rng(42);
  for (std::size_t n : {1u, 5u, 257u, 1024u}) {
    const Tensor x = rng.uniform_tensor({n}, -5.0, 5.0);
    auto [h0, h1] = share(x, rng);
    auto [p0_to_p3, p3_to_p0] = LocalChannel::make_pair();
    auto [p1_to_p3, p3_to_p1] = LocalChannel::make_pair();

    const std::uint64_t perm_seed = rng.next_u64();
    const std::uint64_t round = 7;
    EvalResult r0, r1;
    Rng p3_rng = Rng::derive(1000, round);

    run_parties(
        [&] {
          EvalOptions opt;
          opt.want_prime = true;
          r0 = eval_nonlinear_party(Role::P0, *p0_to_p3, h0,
                                    NonlinearFn::Sigmoid, perm_seed, round,
                                    opt);
        },
        [&] {
          EvalOptions opt;
          opt.want_prime = true;
          r1 = eval_nonlinear_party(Role::P1, *p1_to_p3, h1,
                                    NonlinearFn::Sigmoid, perm_seed, round,
                                    opt);
        },
        [&] {
          p3_serve_round(*p3_to_p0, *p3_to_p1, round, NonlinearFn::Sigmoid,
                         /*want_prime=*/true, p3_rng);
        });

    REQUIRE(max_abs_diff(reconstruct(r0.fx, r1.fx),
                         apply_fn(NonlinearFn::Sigmoid, x)) < 1e-9);
    REQUIRE(r0.with_prime);
    REQUIRE(max_abs_diff(reconstruct(r0.fpx, r1.fpx),
                         apply_fn(NonlinearFn::SigmoidPrime, x)) < 1e-9);
  }
}

TEST_CASE("helper sees only the permuted multiset", "[nonlinear]") {
  Rng rng(43);
  const std::size_t n = 128;
  const Tensor x = rng.uniform_tensor({n}, -3.0, 3.0);
  auto [h0, h1] = share(x, rng);
  auto [p0_to_p3, p3_to_p0] = LocalChannel::make_pair();
  auto [p1_to_p3, p3_to_p1] = LocalChannel::make_pair();

  const std::uint64_t perm_seed = 555;
  const std::uint64_t round = 3;
  Tensor p3_view;
  std::string meta0, meta1;  // asserted after the threads join

  run_parties(
      [&] {
        eval_nonlinear_party(Role::P0, *p0_to_p3, h0, NonlinearFn::Relu,
                             perm_seed, round);
      },
      [&] {
        eval_nonlinear_party(Role::P1, *p1_to_p3, h1, NonlinearFn::Relu,
                             perm_seed, round);
      },
      [&] {
        // stand-in helper: capture the reconstructed view, then serve the
        // round exactly as p3_serve_round would.
        const Msg m0 = p3_to_p0->recv(Slot::Eval, round);
        const Msg m1 = p3_to_p1->recv(Slot::Eval, round);
        meta0 = m0.meta;
        meta1 = m1.meta;
        p3_view = add(m0.tensors.at(0), m1.tensors.at(0));
        Rng round_rng = Rng::derive(77, round);
        const P3Reply rep = p3_eval_round(m0.tensors.at(0), m1.tensors.at(0),
                                          NonlinearFn::Relu,
                                          /*want_prime=*/false, round_rng);
        p3_to_p0->send(Msg{Slot::Fx, round, "relu", {rep.fx0}});
        p3_to_p1->send(Msg{Slot::Fx, round, "relu", {rep.fx1}});
      });

  REQUIRE(meta0 == "relu");
  REQUIRE(meta0 == meta1);

  // the view is bit-exactly the permutation of the jointly held plaintext
  // (reindexing the shares commutes with the helper's addition)...
  const Permutation perm = Permutation::from_seed(perm_seed, n);
  const Tensor held = reconstruct(h0, h1);
  REQUIRE(max_abs_diff(p3_view, perm.apply(held)) == 0.0);
  REQUIRE(max_abs_diff(p3_view, perm.apply(x)) < 1e-12);
  // ...and never the raw order (overwhelmingly unlikely for n=128)
  REQUIRE(max_abs_diff(p3_view, x) > 1e-6);
  // multiset equality after sorting, bitwise
  auto xs = held.data();
  auto vs = p3_view.data();
  std::sort(xs.begin(), xs.end());
  std::sort(vs.begin(), vs.end());
  REQUIRE(xs == vs);
}

TEST_CASE("local noise changes the helper input, not the result shape",
          "[nonlinear]") {
  Rng rng(44);
  const std::size_t n = 4096;
  const Tensor x = rng.uniform_tensor({n}, -1.0, 1.0);
  auto [h0, h1] = share(x, rng);
  auto [p0_to_p3, p3_to_p0] = LocalChannel::make_pair();
  auto [p1_to_p3, p3_to_p1] = LocalChannel::make_pair();

  const double sigma = 0.05;
  const std::uint64_t round = 1;
  EvalResult r0, r1;
  Rng noise0(11), noise1(12);
  Rng p3_rng(13);
  Tensor p3_view;

  run_parties(
      [&] {
        EvalOptions opt;
        opt.noise_sigma = sigma;
        opt.noise_rng = &noise0;
        r0 = eval_nonlinear_party(Role::P0, *p0_to_p3, h0,
                                  NonlinearFn::Sigmoid, 900, round, opt);
      },
      [&] {
        EvalOptions opt;
        opt.noise_sigma = sigma;
        opt.noise_rng = &noise1;
        r1 = eval_nonlinear_party(Role::P1, *p1_to_p3, h1,
                                  NonlinearFn::Sigmoid, 900, round, opt);
      },
      [&] {
        const Msg m0 = p3_to_p0->recv(Slot::Eval, round);
        const Msg m1 = p3_to_p1->recv(Slot::Eval, round);
        p3_view = add(m0.tensors.at(0), m1.tensors.at(0));
        Rng round_rng(14);
        const P3Reply rep =
            p3_eval_round(m0.tensors.at(0), m1.tensors.at(0),
                          NonlinearFn::Sigmoid, false, round_rng);
        p3_to_p0->send(Msg{Slot::Fx, round, "sigmoid", {rep.fx0}});
        p3_to_p1->send(Msg{Slot::Fx, round, "sigmoid", {rep.fx1}});
      });

  // combined noise has std sigma (each party adds sigma/sqrt(2)); the view
  // must differ from the exact permuted values by roughly that much.
  const Permutation perm = Permutation::from_seed(900, n);
  const Tensor exact = perm.apply(x);
  double s2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = p3_view[i] - exact[i];
    s2 += d * d;
  }
  const double emp_sigma = std::sqrt(s2 / double(n));
  REQUIRE(emp_sigma == Catch::Approx(sigma).epsilon(0.10));

  // the result carries the noise through f but stays near sigmoid(x)
  const Tensor got = reconstruct(r0.fx, r1.fx);
  REQUIRE(max_abs_diff(got, apply_fn(NonlinearFn::Sigmoid, x)) < 6 * sigma);
  REQUIRE(max_abs_diff(got, apply_fn(NonlinearFn::Sigmoid, x)) > 0.0);
}
