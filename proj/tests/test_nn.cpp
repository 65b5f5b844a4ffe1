#include "doctest.h"

#include <cmath>

#include "oracles.hpp"
#include "scriptor/nn.hpp"

using namespace scriptor;

TEST_CASE("linear layer matches manual affine map") {
  RngStream rng(1);
  Linear lin(3, 2, rng);
  Tensor x = Tensor::randn({4, 3}, rng);
  Tensor y = lin.forward(x);
  CHECK(y.shape() == Shape{4, 2});
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 2; ++c) {
      double acc = lin.b.data()[c];
      for (int k = 0; k < 3; ++k) acc += x.data()[r * 3 + k] * lin.w.data()[k * 2 + c];
      CHECK(y.data()[r * 2 + c] == doctest::Approx(acc).epsilon(1e-12));
    }
}

TEST_CASE("layer gradients via finite differences") {
  RngStream rng(2);
  Linear lin(4, 3, rng);
  InstanceNorm2d in2d(2);
  LayerNorm ln(3);
  Tensor x = Tensor::randn({5, 4}, rng, 1.0, true);
  Tensor m = Tensor::randn({2, 4, 4}, rng, 1.0, true);
  auto rep = oracle::fd_check(
      [&]() {
        Tensor a = ln.forward(lin.forward(x));
        Tensor b = in2d.forward(m);
        return add(oracle::weighted_sum(a, 3), oracle::weighted_sum(b, 4));
      },
      {{"w", lin.w},
       {"b", lin.b},
       {"g", ln.gamma},
       {"be", ln.beta},
       {"ig", in2d.gamma},
       {"ib", in2d.beta},
       {"x", x},
       {"m", m}});
  CHECK(rep.max_rel < 1e-4);
}

TEST_CASE("instance norm affine applies per channel") {
  RngStream rng(3);
  InstanceNorm2d in2d(2);
  in2d.gamma.data() = {2.0, 3.0};
  in2d.beta.data() = {-1.0, 0.5};
  Tensor m = Tensor::randn({2, 3, 3}, rng);
  Tensor y = in2d.forward(m);
  Tensor base = normalize(m, NormMode::kInstance, in2d.eps);
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 9; ++i) {
      double expect = base.data()[c * 9 + i] * in2d.gamma.data()[c] + in2d.beta.data()[c];
      CHECK(y.data()[c * 9 + i] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("squeeze excite zero-initialized gates scale by half") {
  RngStream rng(4);
  SqueezeExcite se(4, 2, rng);
  std::fill(se.reduce.w.data().begin(), se.reduce.w.data().end(), 0.0);
  std::fill(se.reduce.b.data().begin(), se.reduce.b.data().end(), 0.0);
  std::fill(se.expand.w.data().begin(), se.expand.w.data().end(), 0.0);
  std::fill(se.expand.b.data().begin(), se.expand.b.data().end(), 0.0);
  Tensor x = Tensor::randn({4, 3, 3}, rng);
  Tensor y = se.forward(x);
  for (std::size_t i = 0; i < x.data().size(); ++i) {
    CHECK(y.data()[i] == doctest::Approx(0.5 * x.data()[i]).epsilon(1e-12));
  }
}

TEST_CASE("squeeze excite gates stay in (0,1) and gradients flow") {
  RngStream rng(5);
  SqueezeExcite se(4, 2, rng);
  Tensor x = Tensor::randn({4, 5, 5}, rng, 1.0, true);
  Tensor g = se.gates(x);
  for (double v : g.data()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  auto rep = oracle::fd_check([&]() { return oracle::weighted_sum(se.forward(x)); },
                              {{"rw", se.reduce.w},
                               {"rb", se.reduce.b},
                               {"ew", se.expand.w},
                               {"eb", se.expand.b},
                               {"x", x}});
  CHECK(rep.max_rel < 1e-4);
}

TEST_CASE("squeeze excite rejects non-dividing reduction") {
  RngStream rng(6);
  CHECK_THROWS_AS(SqueezeExcite(6, 4, rng), ParameterError);
}

TEST_CASE("mix dropout element path with p=1 zeroes output") {
  RngStream rng(7);
  MixDropout md;
  md.p_elem = 1.0;
  Tensor x = Tensor::full({2, 3, 3}, 5.0);
  Tensor y = md.forward_forced(x, rng, true, 0);
  for (double v : y.data()) CHECK(v == 0.0);
}

TEST_CASE("mix dropout eval mode is identity") {
  RngStream rng(8);
  MixDropout md;
  Tensor x = Tensor::full({2, 2, 2}, 1.5);
  Tensor y = md.forward(x, rng, false);
  CHECK(y.node() == x.node());
}

TEST_CASE("mix dropout picks both paths over repeated draws") {
  RngStream rng(9);
  MixDropout md;
  md.p_elem = 0.5;
  md.p_channel = 0.5;
  Tensor x = Tensor::full({4, 8, 8}, 1.0);
  bool saw_partial_channel = false, saw_whole_channel = false;
  for (int i = 0; i < 40; ++i) {
    Tensor y = md.forward(x, rng, true);
    for (int c = 0; c < 4; ++c) {
      bool all_same = true;
      double first = y.data()[c * 64];
      for (int j = 0; j < 64; ++j) {
        if (y.data()[c * 64 + j] != first) all_same = false;
      }
      if (all_same) {
        saw_whole_channel = true;
      } else {
        saw_partial_channel = true;
      }
    }
  }
  CHECK(saw_partial_channel);
  CHECK(saw_whole_channel);
}

TEST_CASE("embedding returns table rows") {
  RngStream rng(10);
  Embedding emb(6, 3, rng);
  Tensor y = emb.forward({2, 0, 5});
  for (int j = 0; j < 3; ++j) {
    CHECK(y.data()[0 * 3 + j] == emb.table.data()[2 * 3 + j]);
    CHECK(y.data()[1 * 3 + j] == emb.table.data()[0 * 3 + j]);
    CHECK(y.data()[2 * 3 + j] == emb.table.data()[5 * 3 + j]);
  }
}

TEST_CASE("param map collects and rejects duplicates") {
  RngStream rng(11);
  Linear lin(2, 2, rng);
  ParamMap params;
  lin.collect(params, "layer");
  CHECK(params.size() == 2);
  CHECK(params.find("layer.w") != nullptr);
  CHECK(params.find("layer.missing") == nullptr);
  CHECK_THROWS_AS(lin.collect(params, "layer"), ContractError);
}

TEST_CASE("depthwise separable layer output shape and gradients") {
  RngStream rng(12);
  DepthwiseSeparable ds(3, 5, 3, 2, 1, rng);
  Tensor x = Tensor::randn({3, 6, 6}, rng, 1.0, true);
  Tensor y = ds.forward(x);
  CHECK(y.shape() == Shape{5, 3, 6});
  auto rep = oracle::fd_check([&]() { return oracle::weighted_sum(ds.forward(x)); },
                              {{"dk", ds.depth_k}, {"pk", ds.point_k}, {"b", ds.b}, {"x", x}});
  CHECK(rep.max_rel < 1e-4);
}
