#include "scriptor/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <utility>

#include "scriptor/adaptive.hpp"
#include "scriptor/decoder.hpp"
#include "scriptor/encoder.hpp"
#include "scriptor/losses.hpp"
#include "scriptor/nn.hpp"
#include "scriptor/tensor.hpp"

namespace scriptor {

namespace {

using NamedParams = std::vector<std::pair<std::string, Tensor>>;

// Deterministic scalarization so every output coordinate influences the loss
// with a distinct weight.
Tensor weighted_total(const Tensor& y, std::uint64_t seed) {
  RngStream rng(seed);
  std::vector<double> w(y.data().size());
  for (double& v : w) v = rng.uniform(0.25, 1.75) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
  return sum_all(mul(y, Tensor::from(std::move(w), y.shape())));
}

GradCheckCase check_case(const std::string& name, const std::function<Tensor()>& build,
                         const NamedParams& params, double eps, double tol,
                         std::int64_t cap) {
  GradCheckCase out;
  out.name = name;
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    loss = build();
  }
  for (const auto& [pname, p] : params) p.node()->grad.assign(p.data().size(), 0.0);
  tape.backward(loss);
  std::vector<std::vector<double>> grads;
  for (const auto& [pname, p] : params) grads.push_back(p.node()->grad);

  RngStream pick(derive_seed(1234, name));
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor p = params[pi].second;
    std::int64_t n = static_cast<std::int64_t>(p.data().size());
    std::vector<std::int64_t> coords;
    if (cap < 0 || n <= cap) {
      for (std::int64_t i = 0; i < n; ++i) coords.push_back(i);
    } else {
      for (std::int64_t i = 0; i < cap; ++i) coords.push_back(pick.uniform_int(0, n - 1));
    }
    for (std::int64_t j : coords) {
      double saved = p.data()[static_cast<std::size_t>(j)];
      p.data()[static_cast<std::size_t>(j)] = saved + eps;
      tape.replay();
      double lp = loss.value();
      p.data()[static_cast<std::size_t>(j)] = saved - eps;
      tape.replay();
      double lm = loss.value();
      p.data()[static_cast<std::size_t>(j)] = saved;
      double fd = (lp - lm) / (2.0 * eps);
      double g = grads[pi][static_cast<std::size_t>(j)];
      double rel = std::fabs(g - fd) / std::max({std::fabs(g), std::fabs(fd), 1e-3});
      out.max_rel = std::max(out.max_rel, rel);
      ++out.checked;
    }
  }
  tape.replay();  // leave values as built
  out.pass = out.max_rel < tol;
  return out;
}

Tensor rand_param(const Shape& shape, std::uint64_t seed, double stddev = 1.0) {
  RngStream rng(seed);
  return Tensor::randn(shape, rng, stddev, true);
}

// Values pushed away from zero so kinked ops stay locally smooth.
Tensor rand_offset_param(const Shape& shape, std::uint64_t seed, double margin) {
  Tensor t = rand_param(shape, seed);
  for (double& v : t.data()) v += (v >= 0.0 ? margin : -margin);
  return t;
}

Tensor rand_positive_param(const Shape& shape, std::uint64_t seed) {
  Tensor t = rand_param(shape, seed, 0.4);
  for (double& v : t.data()) v = 0.4 + std::fabs(v);
  return t;
}

}  // namespace

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  for (const GradCheckCase& c : cases) {
    os << (c.pass ? "pass" : "FAIL") << "  " << c.name << "  max_rel=" << c.max_rel
       << "  coords=" << c.checked << "\n";
  }
  os << (all_pass ? "all gradients match" : "GRADIENT MISMATCH") << " (" << cases.size()
     << " ops, tolerance " << tolerance << ")\n";
  return os.str();
}

GradCheckReport run_gradient_suite(std::int64_t max_coords_per_param) {
  GradCheckReport report;
  const double eps = report.eps;
  const double tol = report.tolerance;
  const std::int64_t cap = max_coords_per_param;

  auto run = [&](const std::string& name, const NamedParams& params,
                 const std::function<Tensor()>& build) {
    report.cases.push_back(check_case(name, build, params, eps, tol, cap));
  };

  {
    Tensor a = rand_param({2, 3}, 101), b = rand_param({2, 3}, 102);
    run("add", {{"a", a}, {"b", b}}, [=] { return weighted_total(add(a, b), 1); });
    run("sub", {{"a", a}, {"b", b}}, [=] { return weighted_total(sub(a, b), 2); });
    run("mul", {{"a", a}, {"b", b}}, [=] { return weighted_total(mul(a, b), 3); });
    run("neg", {{"a", a}}, [=] { return weighted_total(neg(a), 4); });
    run("add_scalar", {{"a", a}}, [=] { return weighted_total(add_scalar(a, 0.7), 5); });
    run("mul_scalar", {{"a", a}}, [=] { return weighted_total(mul_scalar(a, -1.3), 6); });
    run("sigmoid", {{"a", a}}, [=] { return weighted_total(sigmoid(a), 7); });
    run("exp", {{"a", a}}, [=] { return weighted_total(exp_t(a), 8); });
  }
  {
    Tensor s = rand_param({1}, 103);
    Tensor x = rand_param({3, 2}, 104);
    run("scale_by", {{"x", x}, {"s", s}}, [=] { return weighted_total(scale_by(x, s), 9); });
  }
  {
    Tensor a = rand_offset_param({2, 4}, 105, 0.5);
    run("relu", {{"a", a}}, [=] { return weighted_total(relu(a), 10); });
    run("abs", {{"a", a}}, [=] { return weighted_total(abs_t(a), 11); });
    run("reciprocal", {{"a", a}}, [=] { return weighted_total(reciprocal(a), 12); });
  }
  {
    Tensor a = rand_positive_param({3, 3}, 106);
    run("log", {{"a", a}}, [=] { return weighted_total(log_t(a), 13); });
    run("sqrt", {{"a", a}}, [=] { return weighted_total(sqrt_t(a), 14); });
  }
  {
    Tensor a = rand_param({2, 6}, 107);
    run("reshape", {{"a", a}}, [=] { return weighted_total(reshape(a, {3, 4}), 15); });
    run("transpose2d", {{"a", a}}, [=] { return weighted_total(transpose2d(a), 16); });
    run("narrow", {{"a", a}}, [=] { return weighted_total(narrow(a, 1, 1, 3), 17); });
  }
  {
    Tensor a = rand_param({2, 3}, 108), b = rand_param({1, 3}, 109);
    run("concat", {{"a", a}, {"b", b}},
        [=] { return weighted_total(concat({a, b}, 0), 18); });
  }
  {
    Tensor v = rand_param({4}, 110);
    run("broadcast_rows", {{"v", v}},
        [=] { return weighted_total(broadcast_rows(v, 3), 19); });
  }
  {
    Tensor a = rand_param({3, 4}, 111);
    run("sum_all", {{"a", a}}, [=] { return weighted_total(sum_all(a), 20); });
    run("mean_all", {{"a", a}}, [=] { return weighted_total(mean_all(a), 21); });
    run("mean_rows", {{"a", a}}, [=] { return weighted_total(mean_rows(a), 22); });
    run("pool_pairs_rows", {{"a", a}},
        [=] { return weighted_total(pool_pairs_rows(a), 23); });
    run("softmax_axis0", {{"a", a}},
        [=] { return weighted_total(softmax_axis(a, 0), 24); });
    run("softmax_axis1", {{"a", a}},
        [=] { return weighted_total(softmax_axis(a, 1), 25); });
    run("log_softmax_rows", {{"a", a}},
        [=] { return weighted_total(log_softmax_rows(a), 26); });
  }
  {
    Tensor a = rand_param({3, 4}, 112);
    std::vector<std::uint8_t> allowed = {1, 0, 1, 1, 0, 1, 1, 0, 1, 1, 1, 0};
    run("softmax_masked_rows", {{"a", a}},
        [=] { return weighted_total(softmax_masked_rows(a, allowed), 27); });
  }
  {
    Tensor x = rand_param({2, 3, 4}, 113);
    Tensor s = rand_param({2}, 114);
    run("global_avg_pool2d", {{"x", x}},
        [=] { return weighted_total(global_avg_pool2d(x), 28); });
    run("scale_channels", {{"x", x}, {"s", s}},
        [=] { return weighted_total(scale_channels(x, s), 29); });
    run("adaptive_avg_pool2d", {{"x", x}},
        [=] { return weighted_total(adaptive_avg_pool2d(x, 2, 3), 30); });
    run("upsample_nearest2x", {{"x", x}},
        [=] { return weighted_total(upsample_nearest2x(x), 31); });
    run("normalize_instance", {{"x", x}},
        [=] { return weighted_total(normalize(x, NormMode::kInstance, 1e-5), 32); });
  }
  {
    Tensor x = rand_param({3, 5}, 115);
    run("normalize_layer", {{"x", x}},
        [=] { return weighted_total(normalize(x, NormMode::kLayer, 1e-5), 33); });
  }
  {
    Tensor x = rand_param({2, 4, 6}, 116);
    run("avg_pool2x2", {{"x", x}}, [=] { return weighted_total(avg_pool2x2(x), 34); });
  }
  {
    Tensor a = rand_param({2, 3}, 117), b = rand_param({3, 4}, 118);
    Tensor bias = rand_param({3}, 119);
    run("matmul", {{"a", a}, {"b", b}},
        [=] { return weighted_total(matmul(a, b), 35); });
    run("add_bias", {{"a", a}, {"bias", bias}},
        [=] { return weighted_total(add_bias(a, bias), 36); });
  }
  {
    Tensor x = rand_param({2, 5, 6}, 121);
    Tensor k = rand_param({3, 2, 3, 3}, 122, 0.5);
    Tensor b = rand_param({3}, 123);
    run("conv2d", {{"x", x}, {"k", k}, {"b", b}},
        [=] { return weighted_total(conv2d(x, k, b, 1, 1, 1, 1), 37); });
    run("conv2d_strided", {{"x", x}, {"k", k}, {"b", b}},
        [=] { return weighted_total(conv2d(x, k, b, 2, 2, 1, 1), 38); });
    run("conv2d_nobias", {{"x", x}, {"k", k}},
        [=] { return weighted_total(conv2d(x, k, 1, 1, 0, 0), 39); });
  }
  {
    Tensor x = rand_param({3, 5, 5}, 124);
    Tensor dk = rand_param({3, 3, 3}, 125, 0.5);
    Tensor pk = rand_param({2, 3, 1, 1}, 126, 0.5);
    Tensor b = rand_param({3}, 127);
    Tensor b2 = rand_param({2}, 128);
    run("depthwise_conv2d", {{"x", x}, {"dk", dk}, {"b", b}},
        [=] { return weighted_total(depthwise_conv2d(x, dk, b, 1, 1, 1, 1), 40); });
    run("depthwise_separable", {{"x", x}, {"dk", dk}, {"pk", pk}, {"b2", b2}},
        [=] {
          return weighted_total(depthwise_separable_conv2d(x, dk, pk, b2, 1, 1, 1, 1), 41);
        });
  }
  {
    Tensor table = rand_param({5, 3}, 129);
    std::vector<std::int32_t> ids = {0, 2, 4, 2};
    run("embedding_rows", {{"table", table}},
        [=] { return weighted_total(embedding_rows(table, ids), 42); });
  }
  {
    Tensor x = rand_param({4, 5}, 130);
    std::vector<std::int32_t> ids = {1, 0, 3, 2};
    std::vector<std::uint8_t> mask = {1, 1, 0, 1};
    run("nll_selected", {{"x", x}},
        [=] { return nll_selected(log_softmax_rows(x), ids, mask, 3.0); });
  }
  {
    Tensor x = rand_param({3, 4}, 131);
    run("dropout", {{"x", x}}, [=] {
      RngStream drop_rng(77);
      return weighted_total(dropout(x, 0.4, drop_rng, true), 43);
    });
  }
  {
    Tensor x = rand_param({4, 3, 3}, 132);
    run("dropout_channels", {{"x", x}}, [=] {
      RngStream drop_rng(78);
      return weighted_total(dropout_channels(x, 0.4, drop_rng, true), 44);
    });
  }
  {
    RngStream rng(200);
    Linear lin(3, 4, rng);
    Tensor x = rand_param({2, 3}, 133);
    run("linear", {{"w", lin.w}, {"b", lin.b}, {"x", x}},
        [=] { return weighted_total(lin.forward(x), 45); });
  }
  {
    LayerNorm ln(4);
    for (double& v : ln.gamma.data()) v = 1.1;
    for (double& v : ln.beta.data()) v = 0.1;
    Tensor x = rand_param({3, 4}, 134);
    run("layer_norm", {{"gamma", ln.gamma}, {"beta", ln.beta}, {"x", x}},
        [=] { return weighted_total(ln.forward(x), 46); });
  }
  {
    InstanceNorm2d inorm(2);
    for (double& v : inorm.gamma.data()) v = 0.9;
    Tensor x = rand_param({2, 3, 4}, 135);
    run("instance_norm", {{"gamma", inorm.gamma}, {"beta", inorm.beta}, {"x", x}},
        [=] { return weighted_total(inorm.forward(x), 47); });
  }
  {
    RngStream rng(201);
    SqueezeExcite se(4, 2, rng);
    Tensor x = rand_param({4, 3, 3}, 136);
    NamedParams params{{"x", x}};
    ParamMap pm;
    se.collect(pm, "se");
    for (const auto& [n, t] : pm.items()) params.emplace_back(n, t);
    run("squeeze_excite", params, [=] { return weighted_total(se.forward(x), 48); });
  }
  {
    MixDropout md;
    md.p_elem = 0.3;
    md.p_channel = 0.3;
    Tensor x = rand_param({3, 4, 4}, 137);
    run("mix_dropout_elem", {{"x", x}}, [=] {
      RngStream drop_rng(79);
      return weighted_total(md.forward_forced(x, drop_rng, true, 0), 49);
    });
    run("mix_dropout_channel", {{"x", x}}, [=] {
      RngStream drop_rng(80);
      return weighted_total(md.forward_forced(x, drop_rng, true, 1), 50);
    });
  }
  {
    Tensor q = rand_param({3, 4}, 138), k = rand_param({5, 4}, 139), v = rand_param({5, 4}, 140);
    std::vector<std::uint8_t> allowed = full_mask(3, 5);
    run("scaled_dot_attention", {{"q", q}, {"k", k}, {"v", v}},
        [=] { return weighted_total(scaled_dot_attention(q, k, v, &allowed), 51); });
  }
  {
    RngStream rng(202);
    MultiHeadAttention mha(8, 2, rng);
    Tensor q = rand_param({3, 8}, 141), kv = rand_param({4, 8}, 142);
    std::vector<std::uint8_t> allowed = full_mask(3, 4);
    NamedParams params{{"q", q}, {"kv", kv}};
    ParamMap pm;
    mha.collect(pm, "mha");
    for (const auto& [n, t] : pm.items()) params.emplace_back(n, t);
    run("multi_head_attention", params,
        [=] { return weighted_total(mha.forward(q, kv, &allowed), 52); });
  }
  {
    RngStream rng(203);
    MixedMultiHeadAttention mixed(8, 2, 3, 2, 1, rng);
    Tensor q = rand_param({4, 8}, 143), kv = rand_param({5, 8}, 144);
    NamedParams params{{"q", q}, {"kv", kv}};
    ParamMap pm;
    mixed.collect(pm, "mixed");
    for (const auto& [n, t] : pm.items()) params.emplace_back(n, t);
    run("mixed_attention", params, [=] { return weighted_total(mixed.forward(q, kv), 53); });
  }
  {
    RngStream rng(204);
    DecoderConfig dc;
    dc.num_layers = 1;
    dc.d_model = 8;
    dc.num_heads = 2;
    dc.k_mem = 2;
    dc.sparse_window = 3;
    dc.sparse_anchor = 1;
    dc.pffn_hidden = 8;
    dc.fusion_levels = 2;
    FusionCrossAttention fusion(dc, rng);
    Tensor q = rand_param({3, 8}, 145), kv = rand_param({6, 8}, 146);
    NamedParams params{{"q", q}, {"kv", kv}};
    ParamMap pm;
    fusion.collect(pm, "fusion");
    for (const auto& [n, t] : pm.items()) params.emplace_back(n, t);
    run("fusion_attention", params, [=] { return weighted_total(fusion.forward(q, kv), 54); });

    DecoderLayer layer(dc, rng);
    Tensor x = rand_param({3, 8}, 147);
    NamedParams lp{{"x", x}, {"kv", kv}};
    ParamMap lpm;
    layer.collect(lpm, "layer");
    for (const auto& [n, t] : lpm.items()) lp.emplace_back(n, t);
    run("decoder_layer", lp, [=] { return weighted_total(layer.forward(x, kv), 55); });
  }
  {
    Tensor fmap = rand_param({4, 2, 3}, 148);
    run("position_hint_blend", {{"fmap", fmap}},
        [=] { return weighted_total(blend_position_hint(fmap, 0.3), 56); });
  }
  {
    Tensor c = rand_param({1}, 149, 0.2);
    c.data()[0] = 0.45;
    FactorParams fp;
    fp.base = 1.3;
    fp.gamma = 0.6;
    fp.delta = 4.0;
    fp.theta = 0.5;
    run("scaling_factor", {{"c", c}},
        [=] { return weighted_total(scaling_factor(c, fp), 57); });
  }
  {
    RngStream rng(205);
    ComplexityNetwork phi(ScaleLevel::kLine, 4, 6, 0.0, rng);
    Tensor fmap = rand_param({4, 4, 8}, 150, 0.5);
    NamedParams params{{"fmap", fmap}};
    ParamMap pm;
    phi.collect(pm, "phi");
    for (const auto& [n, t] : pm.items()) params.emplace_back(n, t);
    run("complexity_network", params, [=] {
      RngStream idle(0);
      return weighted_total(phi.assess(fmap, idle, false), 58);
    });
  }
  {
    RngStream rng(206);
    FeatureGate gate(4, rng);
    Tensor fmap = rand_param({4, 2, 3}, 151, 0.5);
    Tensor c = rand_param({1}, 152);
    c.data()[0] = 0.37;
    NamedParams params{{"fmap", fmap}, {"c", c}};
    ParamMap pm;
    gate.collect(pm, "gate");
    for (const auto& [n, t] : pm.items()) params.emplace_back(n, t);
    run("feature_gate", params, [=] { return weighted_total(gate.forward(fmap, c), 59); });
  }
  {
    RngStream rng(207);
    SecondPassConfig sc;
    sc.d_model = 8;
    sc.num_heads = 2;
    sc.k_mem = 2;
    sc.sparse_window = 3;
    sc.sparse_anchor = 1;
    SecondPass sp(sc, rng);
    Tensor rows = rand_param({4, 8}, 153, 0.5);
    Tensor c = rand_param({1}, 154);
    c.data()[0] = 0.42;
    NamedParams params{{"rows", rows}, {"c", c}};
    ParamMap pm;
    sp.collect(pm, "second_pass");
    for (const auto& [n, t] : pm.items()) params.emplace_back(n, t);
    run("second_pass", params, [=] { return weighted_total(sp.forward(rows, c), 60); });
  }
  {
    Tensor x = rand_param({5, 4}, 155);
    std::vector<std::int32_t> target = {1, 2, 1};
    run("ctc_loss", {{"x", x}}, [=] { return ctc_loss(log_softmax_rows(x), target); });
  }
  {
    Tensor logits = rand_param({4, 6}, 156);
    Tensor craw = rand_param({1}, 157);
    Tensor p1 = rand_param({1}, 158), p2 = rand_param({1}, 159);
    std::vector<std::int32_t> targets = {2, 4, 1, 5};
    std::vector<std::uint8_t> mask = {0, 1, 0, 1};
    CompositeLossParams clp;
    clp.lambda_c = 0.8;
    clp.lambda_reg = 0.3;
    run("composite_loss", {{"logits", logits}, {"craw", craw}, {"p1", p1}, {"p2", p2}}, [=] {
      ComplexityLossInputs cx;
      cx.c_score = sigmoid(craw);
      cx.c_target = 0.25;
      cx.grad_penalty = abs_t(sub(p1, p2));
      return composite_loss(logits, targets, mask, 0.4, cx, clp).total;
    });
  }

  for (const GradCheckCase& c : report.cases) report.max_rel = std::max(report.max_rel, c.max_rel);
  report.all_pass = std::all_of(report.cases.begin(), report.cases.end(),
                                [](const GradCheckCase& c) { return c.pass; });
  return report;
}

}  // namespace scriptor
