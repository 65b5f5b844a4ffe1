#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "scriptor/encoder.hpp"

using namespace scriptor;

namespace {

bool all_zero(const Tensor& t) {
  for (double v : t.data())
    if (v != 0.0) return false;
  return true;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && a.data() == b.data();
}

}  // namespace

TEST_CASE("scale level names round trip") {
  for (auto lv : {ScaleLevel::kLine, ScaleLevel::kParagraph, ScaleLevel::kSinglePage,
                  ScaleLevel::kDoublePage, ScaleLevel::kTriplePage}) {
    CHECK(scale_level_from_name(scale_level_name(lv)) == lv);
  }
  CHECK(scale_level_columns(ScaleLevel::kSinglePage) == 1);
  CHECK(scale_level_columns(ScaleLevel::kDoublePage) == 2);
  CHECK(scale_level_columns(ScaleLevel::kTriplePage) == 3);
  CHECK_THROWS_AS(scale_level_from_name("chapter"), ParameterError);
}

TEST_CASE("config table follows the scale level") {
  auto single = EncoderConfig::for_level(ScaleLevel::kSinglePage);
  CHECK(single.c_f == 64);
  CHECK(single.width_divisor == 8);
  CHECK(single.block2_stride_w() == 1);
  CHECK(single.block5_stride_w() == 1);
  CHECK(EncoderConfig::for_level(ScaleLevel::kLine).c_f == 64);
  CHECK(EncoderConfig::for_level(ScaleLevel::kParagraph).width_divisor == 8);

  auto dbl = EncoderConfig::for_level(ScaleLevel::kDoublePage);
  CHECK(dbl.c_f == 128);
  CHECK(dbl.width_divisor == 16);
  CHECK(dbl.block2_stride_w() == 2);
  CHECK(dbl.block5_stride_w() == 1);

  auto tri = EncoderConfig::for_level(ScaleLevel::kTriplePage);
  CHECK(tri.c_f == 256);
  CHECK(tri.width_divisor == 32);
  CHECK(tri.block2_stride_w() == 2);
  CHECK(tri.block5_stride_w() == 2);
}

TEST_CASE("stem maps zero image to zeros and shrinks by 8") {
  RngStream rng(31);
  StemBlock stem(8, rng, 1e-5);
  Tensor z = Tensor::zeros({3, 32, 48});
  Tensor y = stem.forward(z);
  CHECK(y.shape() == Shape{8, 4, 6});
  CHECK(all_zero(y));
  CHECK_THROWS_AS(stem.forward(Tensor::zeros({1, 32, 32})), DimensionError);
}

TEST_CASE("encoder honors the output shape contract") {
  RngStream rng(32);
  struct Case {
    ScaleLevel level;
    std::int64_t h, w, c, oh, ow;
  };
  const std::vector<Case> cases = {
      {ScaleLevel::kSinglePage, 256, 256, 64, 8, 32},
      {ScaleLevel::kDoublePage, 256, 512, 128, 8, 32},
      {ScaleLevel::kTriplePage, 256, 768, 256, 8, 24},
  };
  for (const auto& cs : cases) {
    Encoder enc(EncoderConfig::for_level(cs.level), rng);
    Tensor img = Tensor::randn({3, cs.h, cs.w}, rng, 0.5);
    RngStream fwd(1);
    Tensor f = enc.encode(img, fwd, false);
    CHECK(f.shape() == Shape{cs.c, cs.oh, cs.ow});
    if (cs.level == ScaleLevel::kSinglePage) {
      Tensor pe = positional_encoding_2d(cs.oh, cs.ow, cs.c);
      FeatureSeq seq = flatten_with_pe(f, pe, nullptr);
      CHECK(seq.values.shape() == Shape{256, 64});
      CHECK(seq.height == 8);
      CHECK(seq.width == 32);
    }
  }
}

TEST_CASE("gated ds block with silent gate passes half the local branch") {
  RngStream rng(33);
  GatedDSConvBlock blk(4, 1, 1, rng, 1e-5);
  std::fill(blk.gate_mix.w.data().begin(), blk.gate_mix.w.data().end(), 0.0);
  std::fill(blk.gate_mix.b.data().begin(), blk.gate_mix.b.data().end(), 0.0);
  Tensor x = Tensor::randn({4, 6, 6}, rng);
  Tensor local = blk.local_mix.forward(relu(blk.nl.forward(blk.ds_local.forward(x))));
  Tensor expected = mul_scalar(local, 0.5);
  CHECK(bitwise_equal(blk.forward(x), expected));
}

TEST_CASE("gated ds block gradients") {
  RngStream rng(34);
  GatedDSConvBlock blk(4, 2, 1, rng, 1e-5);
  Tensor x = Tensor::randn({4, 4, 4}, rng, 1.0, true);
  ParamMap pm;
  blk.collect(pm, "blk");
  auto params = pm.items();
  params.push_back({"x", x});
  auto rep = oracle::fd_check([&]() { return oracle::weighted_sum(blk.forward(x)); }, params);
  CHECK(rep.max_rel < 1e-4);
}

TEST_CASE("octave block splits channels and halves the low branch") {
  RngStream rng(35);
  OctaveBlock oct(8, 0.5, rng, 1e-5);
  CHECK(oct.c_high == 4);
  CHECK(oct.c_low == 4);
  Tensor x = Tensor::randn({8, 8, 12}, rng);
  auto [high, low] = oct.forward(x);
  CHECK(high.shape() == Shape{4, 8, 12});
  CHECK(low.shape() == Shape{4, 4, 6});

  auto [zh, zl] = oct.forward(Tensor::zeros({8, 8, 12}));
  CHECK(all_zero(zh));
  CHECK(all_zero(zl));
}

TEST_CASE("octave block rejects bad configurations") {
  RngStream rng(36);
  CHECK_THROWS_AS(OctaveBlock(6, 0.25, rng, 1e-5), ParameterError);  // 1.5 low channels
  CHECK_THROWS_AS(OctaveBlock(8, 0.0, rng, 1e-5), ParameterError);
  CHECK_THROWS_AS(OctaveBlock(8, 1.0, rng, 1e-5), ParameterError);
  OctaveBlock oct(8, 0.5, rng, 1e-5);
  CHECK_THROWS_AS(oct.forward(Tensor::zeros({8, 5, 6})), DimensionError);
  CHECK_THROWS_AS(oct.forward(Tensor::zeros({6, 4, 4})), DimensionError);
}

TEST_CASE("octave block gradients through all four paths") {
  RngStream rng(37);
  OctaveBlock oct(8, 0.5, rng, 1e-5);
  Tensor x = Tensor::randn({8, 4, 4}, rng, 1.0, true);
  ParamMap pm;
  oct.collect(pm, "oct");
  auto params = pm.items();
  params.push_back({"x", x});
  auto rep = oracle::fd_check(
      [&]() {
        auto [high, low] = oct.forward(x);
        return add(oracle::weighted_sum(high, 3), oracle::weighted_sum(low, 5));
      },
      params);
  CHECK(rep.max_rel < 1e-4);
}

TEST_CASE("se fuse block merges branches and projects") {
  RngStream rng(38);
  SEFuseBlock fuse(8, 10, 4, rng, 1e-5);
  Tensor high = Tensor::randn({6, 4, 4}, rng, 1.0, true);
  Tensor low = Tensor::randn({2, 2, 2}, rng, 1.0, true);
  Tensor y = fuse.forward(high, low);
  CHECK(y.shape() == Shape{10, 4, 4});

  ParamMap pm;
  fuse.collect(pm, "fuse");
  auto params = pm.items();
  params.push_back({"high", high});
  params.push_back({"low", low});
  auto rep = oracle::fd_check([&]() { return oracle::weighted_sum(fuse.forward(high, low)); },
                              params);
  CHECK(rep.max_rel < 1e-4);
}

TEST_CASE("gated fcn block with silent mask passes half the feature branch") {
  RngStream rng(39);
  GatedConvFcnBlock blk(4, 1, 1, rng, 1e-5, 0.0);
  std::fill(blk.mask.w.data().begin(), blk.mask.w.data().end(), 0.0);
  std::fill(blk.mask.b.data().begin(), blk.mask.b.data().end(), 0.0);
  Tensor x = Tensor::randn({4, 6, 6}, rng);
  Tensor feature = relu(blk.nf.forward(blk.feat.forward(x)));
  CHECK(bitwise_equal(blk.gated(x), mul_scalar(feature, 0.5)));
}

TEST_CASE("gated fcn dropout zeroes everything at p=1 and vanishes in eval") {
  RngStream rng(40);
  GatedConvFcnBlock blk(4, 2, 1, rng, 1e-5, 0.0);
  blk.drop.p_elem = 1.0;
  blk.drop.p_channel = 1.0;
  Tensor x = Tensor::randn({4, 6, 6}, rng);
  RngStream fwd(9);
  CHECK(all_zero(blk.forward(x, fwd, true)));

  RngStream fa(1), fb(2);
  Tensor e1 = blk.forward(x, fa, false);
  Tensor e2 = blk.forward(x, fb, false);
  CHECK(bitwise_equal(e1, e2));  // eval path ignores the rng entirely
}

TEST_CASE("gated fcn gradients") {
  RngStream rng(41);
  GatedConvFcnBlock blk(3, 2, 2, rng, 1e-5, 0.0);
  Tensor x = Tensor::randn({3, 4, 4}, rng, 1.0, true);
  ParamMap pm;
  blk.collect(pm, "fcn");
  auto params = pm.items();
  params.push_back({"x", x});
  RngStream fwd(5);
  auto rep = oracle::fd_check(
      [&]() { return oracle::weighted_sum(blk.forward(x, fwd, false)); }, params);
  CHECK(rep.max_rel < 1e-4);
}

TEST_CASE("positional encoding pinned values") {
  Tensor pe = positional_encoding_2d(3, 4, 8);
  CHECK(pe.shape() == Shape{8, 3, 4});
  auto at = [&](std::int64_t c, std::int64_t y, std::int64_t x) {
    return pe.data()[(c * 3 + y) * 4 + x];
  };
  // origin: sin(0)=0, cos(0)=1 in both the x and the y halves
  CHECK(at(0, 0, 0) == 0.0);
  CHECK(at(1, 0, 0) == 1.0);
  CHECK(at(4, 0, 0) == 0.0);
  CHECK(at(5, 0, 0) == 1.0);
  // first x pair at unit wavelength, second divided by 10000^(2/8)
  CHECK(at(0, 2, 1) == doctest::Approx(std::sin(1.0)).epsilon(1e-12));
  CHECK(at(1, 2, 1) == doctest::Approx(std::cos(1.0)).epsilon(1e-12));
  CHECK(at(2, 0, 1) == doctest::Approx(std::sin(0.1)).epsilon(1e-12));
  CHECK(at(3, 0, 1) == doctest::Approx(std::cos(0.1)).epsilon(1e-12));
  // x half constant along y, y half constant along x
  for (std::int64_t c = 0; c < 4; ++c)
    for (std::int64_t x = 0; x < 4; ++x) CHECK(at(c, 0, x) == at(c, 2, x));
  for (std::int64_t c = 4; c < 8; ++c)
    for (std::int64_t y = 0; y < 3; ++y) CHECK(at(c, y, 0) == at(c, y, 3));

  CHECK_THROWS_AS(positional_encoding_2d(2, 2, 6), ParameterError);
  CHECK_THROWS_AS(positional_encoding_2d(2, 2, 0), ParameterError);
}

TEST_CASE("positional encoding separates every grid position") {
  const std::int64_t h = 64, w = 64, d = 64;
  Tensor pe = positional_encoding_2d(h, w, d);
  std::vector<std::vector<double>> cols;
  cols.reserve(h * w);
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x) {
      std::vector<double> v(d);
      for (std::int64_t c = 0; c < d; ++c) v[c] = pe.data()[(c * h + y) * w + x];
      cols.push_back(std::move(v));
    }
  std::sort(cols.begin(), cols.end());
  CHECK(std::adjacent_find(cols.begin(), cols.end()) == cols.end());
}

TEST_CASE("flatten walks rows in y-major order and adds the encoding") {
  RngStream rng(42);
  Tensor pe = positional_encoding_2d(2, 3, 4);
  Tensor fmap = Tensor::randn({4, 2, 3}, rng);
  FeatureSeq seq = flatten_with_pe(fmap, pe, nullptr);
  CHECK(seq.values.shape() == Shape{6, 4});
  CHECK(seq.height == 2);
  CHECK(seq.width == 3);
  for (std::int64_t y = 0; y < 2; ++y)
    for (std::int64_t x = 0; x < 3; ++x)
      for (std::int64_t c = 0; c < 4; ++c) {
        double want = fmap.data()[(c * 2 + y) * 3 + x] + pe.data()[(c * 2 + y) * 3 + x];
        CHECK(seq.values.data()[(y * 3 + x) * 4 + c] == want);
      }

  FeatureSeq zs = flatten_with_pe(Tensor::zeros({4, 2, 3}), pe, nullptr);
  for (std::int64_t j = 0; j < 6; ++j)
    for (std::int64_t c = 0; c < 4; ++c) {
      CHECK(zs.values.data()[j * 4 + c] == pe.data()[(c * 2 + j / 3) * 3 + j % 3]);
    }
}

TEST_CASE("flatten projects mismatched channel counts through a 1x1 conv") {
  RngStream rng(43);
  Tensor pe = positional_encoding_2d(2, 3, 4);
  Tensor fmap = Tensor::randn({5, 2, 3}, rng);
  CHECK_THROWS_AS(flatten_with_pe(fmap, pe, nullptr), DimensionError);
  Conv2dLayer proj(5, 4, 1, 1, 1, 1, 0, 0, rng);
  FeatureSeq a = flatten_with_pe(fmap, pe, &proj);
  FeatureSeq b = flatten_with_pe(proj.forward(fmap), pe, nullptr);
  CHECK(bitwise_equal(a.values, b.values));
}

TEST_CASE("full encoder gradients on a miniature configuration") {
  RngStream rng(44);
  EncoderConfig cfg = EncoderConfig::for_level(ScaleLevel::kSinglePage, 4);
  cfg.c_f = 6;
  cfg.r_se = 4;
  Encoder enc(cfg, rng);
  Tensor x = Tensor::randn({3, 32, 32}, rng, 0.5, true);
  ParamMap pm;
  enc.collect(pm, "enc");
  auto params = pm.items();
  params.push_back({"x", x});
  RngStream fwd(3);
  auto rep = oracle::fd_check(
      [&]() { return oracle::weighted_sum(enc.encode(x, fwd, false)); }, params, 1e-5, 4);
  CHECK(rep.max_rel < 1e-4);
}

TEST_CASE("encoder evaluation is deterministic") {
  RngStream rng(45);
  Encoder enc(EncoderConfig::for_level(ScaleLevel::kSinglePage, 8), rng);
  Tensor img = Tensor::randn({3, 64, 64}, rng, 0.5);
  RngStream fa(7), fb(99);
  Tensor y1 = enc.encode(img, fa, false);
  Tensor y2 = enc.encode(img, fb, false);
  CHECK(bitwise_equal(y1, y2));
}
