#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <memory>
#include <vector>

#include "harness.hpp"

using namespace psh;
using namespace pshtest;

namespace {

// A full five-node deployment over loopback sockets plus an attached
// coordinator. Ports come from a moving base so repeated rigs in one test
// binary never collide; a bind failure just advances to the next block.
struct TcpRig {
  std::vector<std::unique_ptr<PartyNode>> nodes;
  std::vector<std::unique_ptr<TcpNodeHost>> hosts;
  std::unique_ptr<Coordinator> coordinator;
  CoordinatorSockets socks;

  explicit TcpRig(std::uint64_t seed) {
    static std::atomic<int> next_base{19400};
    for (int attempt = 0; attempt < 20; ++attempt) {
      const int base = next_base.fetch_add(8);
      try {
        build(seed, std::uint16_t(base));
        return;
      } catch (const NetError&) {
        teardown();
      }
    }
    throw NetError("no free loopback port block found");
  }

  ~TcpRig() { teardown(); }

  Coordinator& coord() { return *coordinator; }

 private:
  void build(std::uint64_t seed, std::uint16_t base) {
    Topology topo;
    for (std::size_t i = 0; i < 5; ++i)
      topo.nodes[i] = Endpoint{"127.0.0.1", std::uint16_t(base + i)};

    for (std::size_t i = 0; i < 5; ++i) {
      PartyConfig cfg;
      cfg.role = NodeRole(i);
      cfg.seed = seed;
      nodes.push_back(std::make_unique<PartyNode>(cfg));
    }
    for (auto& n : nodes)
      hosts.push_back(std::make_unique<TcpNodeHost>(*n, topo));
    for (auto& h : hosts) h->start();

    coordinator = std::make_unique<Coordinator>(seed);
    socks = connect_coordinator(*coordinator, topo);
  }

  void teardown() {
    socks.links.clear();
    coordinator.reset();
    for (auto& h : hosts)
      if (h) h->stop();
    hosts.clear();
    nodes.clear();
  }
};

}  // namespace

TEST_CASE("store, exec, and errors travel over sockets", "[tcp]") {
  TcpRig rig(31);
  Coordinator& C = rig.coord();
  Rng rng(1);

  const Tensor t = rng.normal_tensor({9, 5}, 0, 50.0);
  const std::uint64_t k = C.store(NodeRole::P0, t);
  REQUIRE(max_abs_diff(C.fetch(NodeRole::P0, k), t) == 0.0);

  const Tensor u = rng.uniform_tensor({9, 5}, -1, 1);
  const std::uint64_t ku = C.store(NodeRole::P0, u);
  const ExecResult r = C.exec(
      NodeRole::P0,
      "(add k:" + std::to_string(k) + " k:" + std::to_string(ku) + ")");
  REQUIRE(max_abs_diff(C.fetch(NodeRole::P0, r.key_or_throw()), add(t, u)) ==
          0.0);

  C.free(NodeRole::P0, k);
  REQUIRE_THROWS_AS(C.fetch(NodeRole::P0, k), NackError);
  REQUIRE_THROWS_AS(C.exec(NodeRole::P1, "(frobnicate)"), NackError);
}

TEST_CASE("shared protocols run over sockets", "[tcp]") {
  TcpRig rig(32);
  Coordinator& C = rig.coord();
  Rng rng(2);

  const Tensor x = rng.uniform_tensor({6, 4}, -2, 2);
  const Tensor y = rng.uniform_tensor({6, 4}, -2, 2);
  const auto kx = C.share_store(x);
  const auto ky = C.share_store(y);

  C.triple_req(0, MulKind::Elementwise, {6, 4}, {6, 4});
  auto mul_text = [&](std::uint64_t a, std::uint64_t b) {
    return "(beaver_mul k:" + std::to_string(a) + " k:" + std::to_string(b) +
           " i:0 s:ew)";
  };
  const auto res = C.parallel({{NodeRole::P0, mul_text(kx.k0, ky.k0)},
                               {NodeRole::P1, mul_text(kx.k1, ky.k1)}});
  const Tensor prod = C.reconstruct_fetch({res[0].key_or_throw(),
                                           res[1].key_or_throw()});
  REQUIRE(max_abs_diff(prod, mul(x, y)) < 1e-9);

  auto nl_text = [&](std::uint64_t a) {
    return "(eval_nl k:" + std::to_string(a) + " s:sigmoid i:1 i:0)";
  };
  const auto nres = C.parallel({{NodeRole::P0, nl_text(kx.k0)},
                                {NodeRole::P1, nl_text(kx.k1)},
                                {NodeRole::P3, "(p3_serve i:1)"}});
  const Tensor fx = C.reconstruct_fetch({nres[0].key_or_throw(),
                                         nres[1].key_or_throw()});
  REQUIRE(max_abs_diff(fx, apply_fn(NonlinearFn::Sigmoid, x)) < 1e-9);
}

TEST_CASE("socket backend reproduces the in-process backend bit for bit",
          "[tcp]") {
  // same seed, same request script: every reconstruction must match
  // exactly, since all protocol randomness is derived from (seed, round).
  auto script = [](Coordinator& C) {
    Rng rng(3);
    const Tensor x = rng.uniform_tensor({5, 3}, -1, 1);
    const Tensor y = rng.uniform_tensor({3, 4}, -1, 1);
    const auto kx = C.share_store(x);
    const auto ky = C.share_store(y);
    C.triple_req(0, MulKind::Matmul, {5, 3}, {3, 4});
    auto text = [&](std::uint64_t a, std::uint64_t b) {
      return "(beaver_mul k:" + std::to_string(a) + " k:" + std::to_string(b) +
             " i:0 s:mm)";
    };
    const auto res = C.parallel({{NodeRole::P0, text(kx.k0, ky.k0)},
                                 {NodeRole::P1, text(kx.k1, ky.k1)}});
    const Tensor z0 = C.fetch(NodeRole::P0, res[0].key_or_throw());
    const Tensor z1 = C.fetch(NodeRole::P1, res[1].key_or_throw());
    return std::pair{z0, z1};
  };

  LocalDeployment local(33);
  const auto [l0, l1] = script(local.coord());
  TcpRig rig(33);
  const auto [t0, t1] = script(rig.coord());

  REQUIRE(max_abs_diff(l0, t0) == 0.0);
  REQUIRE(max_abs_diff(l1, t1) == 0.0);
}
