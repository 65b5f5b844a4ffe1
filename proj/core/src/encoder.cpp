#include "scriptor/encoder.hpp"

#include <cmath>

namespace scriptor {

const char* scale_level_name(ScaleLevel level) {
  switch (level) {
    case ScaleLevel::kLine: return "line";
    case ScaleLevel::kParagraph: return "paragraph";
    case ScaleLevel::kSinglePage: return "single_page";
    case ScaleLevel::kDoublePage: return "double_page";
    case ScaleLevel::kTriplePage: return "triple_page";
  }
  throw ParameterError("unknown scale level");
}

ScaleLevel scale_level_from_name(const std::string& name) {
  if (name == "line") return ScaleLevel::kLine;
  if (name == "paragraph") return ScaleLevel::kParagraph;
  if (name == "single_page") return ScaleLevel::kSinglePage;
  if (name == "double_page") return ScaleLevel::kDoublePage;
  if (name == "triple_page") return ScaleLevel::kTriplePage;
  throw ParameterError("unknown scale level name: " + name);
}

int scale_level_columns(ScaleLevel level) {
  switch (level) {
    case ScaleLevel::kDoublePage: return 2;
    case ScaleLevel::kTriplePage: return 3;
    default: return 1;
  }
}

EncoderConfig EncoderConfig::for_level(ScaleLevel level, std::int64_t c_mid) {
  EncoderConfig cfg;
  cfg.level = level;
  cfg.c_mid = c_mid;
  switch (level) {
    case ScaleLevel::kLine:
    case ScaleLevel::kParagraph:
    case ScaleLevel::kSinglePage:
      cfg.c_f = 64;
      cfg.width_divisor = 8;
      break;
    case ScaleLevel::kDoublePage:
      cfg.c_f = 128;
      cfg.width_divisor = 16;
      break;
    case ScaleLevel::kTriplePage:
      cfg.c_f = 256;
      cfg.width_divisor = 32;
      break;
  }
  return cfg;
}

namespace {

Tensor norm_relu(const InstanceNorm2d& n, const Tensor& x) { return relu(n.forward(x)); }

}  // namespace

StemBlock::StemBlock(std::int64_t c_mid, RngStream& rng, double eps)
    : conv7(3, c_mid / 2, 7, 7, 2, 2, 3, 3, rng),
      conv3a(c_mid / 2, c_mid, 3, 3, 2, 2, 1, 1, rng),
      conv3b(c_mid, c_mid, 3, 3, 2, 2, 1, 1, rng),
      conv_out(c_mid, c_mid, 3, 3, 1, 1, 1, 1, rng),
      n1(c_mid / 2),
      n2(c_mid),
      n3(c_mid),
      n4(c_mid) {
  if (c_mid % 2 != 0) throw ParameterError("StemBlock: c_mid must be even");
  n1.eps = n2.eps = n3.eps = n4.eps = eps;
}

Tensor StemBlock::forward(const Tensor& x) const {
  if (x.rank() != 3 || x.dim(0) != 3) {
    throw DimensionError("StemBlock: input must be [3,h,w], got " + shape_str(x.shape()));
  }
  Tensor a = norm_relu(n1, conv7.forward(x));
  Tensor b = norm_relu(n2, conv3a.forward(a));
  Tensor c = norm_relu(n3, conv3b.forward(b));
  return norm_relu(n4, conv_out.forward(c));
}

void StemBlock::collect(ParamMap& params, const std::string& prefix) const {
  conv7.collect(params, prefix + ".conv7");
  conv3a.collect(params, prefix + ".conv3a");
  conv3b.collect(params, prefix + ".conv3b");
  conv_out.collect(params, prefix + ".conv_out");
  n1.collect(params, prefix + ".n1");
  n2.collect(params, prefix + ".n2");
  n3.collect(params, prefix + ".n3");
  n4.collect(params, prefix + ".n4");
}

GatedDSConvBlock::GatedDSConvBlock(std::int64_t c, int stride_h, int stride_w, RngStream& rng,
                                   double eps)
    : ds_gate(c, c, 3, stride_h, stride_w, rng),
      ds_local(c, c, 3, stride_h, stride_w, rng),
      ng(c),
      nl(c),
      gate_mix(c, c, 1, 1, 1, 1, 0, 0, rng),
      local_mix(c, c, 1, 1, 1, 1, 0, 0, rng) {
  ng.eps = nl.eps = eps;
}

Tensor GatedDSConvBlock::forward(const Tensor& x) const {
  Tensor g = gate_mix.forward(norm_relu(ng, ds_gate.forward(x)));
  Tensor l = local_mix.forward(norm_relu(nl, ds_local.forward(x)));
  return mul(sigmoid(g), l);
}

void GatedDSConvBlock::collect(ParamMap& params, const std::string& prefix) const {
  ds_gate.collect(params, prefix + ".ds_gate");
  ds_local.collect(params, prefix + ".ds_local");
  ng.collect(params, prefix + ".ng");
  nl.collect(params, prefix + ".nl");
  gate_mix.collect(params, prefix + ".gate_mix");
  local_mix.collect(params, prefix + ".local_mix");
}

OctaveBlock::OctaveBlock(std::int64_t c, double alpha_oct, RngStream& rng, double eps) {
  if (alpha_oct <= 0.0 || alpha_oct >= 1.0) {
    throw ParameterError("OctaveBlock: alpha_oct must be in (0,1)");
  }
  double low_exact = alpha_oct * static_cast<double>(c);
  c_low = static_cast<std::int64_t>(low_exact);
  if (static_cast<double>(c_low) != low_exact || c_low == 0 || c_low == c) {
    throw ParameterError("OctaveBlock: alpha_oct * channels must be a whole number in (0,c)");
  }
  c_high = c - c_low;
  hh = Conv2dLayer(c_high, c_high, 3, 3, 1, 1, 1, 1, rng);
  hl = Conv2dLayer(c_high, c_low, 3, 3, 1, 1, 1, 1, rng);
  lh = Conv2dLayer(c_low, c_high, 3, 3, 1, 1, 1, 1, rng);
  ll = Conv2dLayer(c_low, c_low, 3, 3, 1, 1, 1, 1, rng);
  nh = InstanceNorm2d(c_high);
  nl = InstanceNorm2d(c_low);
  nh.eps = nl.eps = eps;
}

std::pair<Tensor, Tensor> OctaveBlock::forward(const Tensor& x) const {
  if (x.rank() != 3 || x.dim(0) != c_high + c_low) {
    throw DimensionError("OctaveBlock: expected " + std::to_string(c_high + c_low) +
                         " channels, got " + shape_str(x.shape()));
  }
  if (x.dim(1) % 2 != 0 || x.dim(2) % 2 != 0) {
    throw DimensionError("OctaveBlock: spatial dims must be even for the half-resolution path, got " +
                         shape_str(x.shape()));
  }
  Tensor x_high = narrow(x, 0, 0, c_high);
  Tensor x_low = avg_pool2x2(narrow(x, 0, c_high, c_low));
  // high out: high->high plus upsampled low->high
  Tensor high = add(hh.forward(x_high), upsample_nearest2x(lh.forward(x_low)));
  // low out: low->low plus downsampled high->low
  Tensor low = add(ll.forward(x_low), hl.forward(avg_pool2x2(x_high)));
  return {norm_relu(nh, high), norm_relu(nl, low)};
}

void OctaveBlock::collect(ParamMap& params, const std::string& prefix) const {
  hh.collect(params, prefix + ".hh");
  hl.collect(params, prefix + ".hl");
  lh.collect(params, prefix + ".lh");
  ll.collect(params, prefix + ".ll");
  nh.collect(params, prefix + ".nh");
  nl.collect(params, prefix + ".nl");
}

SEFuseBlock::SEFuseBlock(std::int64_t c, std::int64_t c_f, std::int64_t r_se, RngStream& rng,
                         double eps)
    : se(c, r_se, rng), proj(c, c_f, 3, 3, 1, 1, 1, 1, rng), np(c_f) {
  np.eps = eps;
}

Tensor SEFuseBlock::forward(const Tensor& high, const Tensor& low) const {
  Tensor merged = concat({high, upsample_nearest2x(low)}, 0);
  Tensor gated = se.forward(merged);
  return norm_relu(np, proj.forward(gated));
}

void SEFuseBlock::collect(ParamMap& params, const std::string& prefix) const {
  se.collect(params, prefix + ".se");
  proj.collect(params, prefix + ".proj");
  np.collect(params, prefix + ".np");
}

GatedConvFcnBlock::GatedConvFcnBlock(std::int64_t c_f, int stride_h, int stride_w, RngStream& rng,
                                     double eps, double dropout_p)
    : feat(c_f, c_f, 3, 3, 1, 1, 1, 1, rng),
      mask(c_f, c_f, 3, 3, 1, 1, 1, 1, rng),
      closing(c_f, c_f, 3, 3, stride_h, stride_w, 1, 1, rng),
      nf(c_f),
      nc(c_f) {
  nf.eps = nc.eps = eps;
  drop.p_elem = dropout_p;
  drop.p_channel = dropout_p;
}

Tensor GatedConvFcnBlock::gated(const Tensor& x) const {
  Tensor f = norm_relu(nf, feat.forward(x));
  Tensor m = sigmoid(mask.forward(x));
  return mul(m, f);
}

Tensor GatedConvFcnBlock::forward(const Tensor& x, RngStream& rng, bool train) const {
  Tensor y = norm_relu(nc, closing.forward(gated(x)));
  return drop.forward(y, rng, train);
}

void GatedConvFcnBlock::collect(ParamMap& params, const std::string& prefix) const {
  feat.collect(params, prefix + ".feat");
  mask.collect(params, prefix + ".mask");
  closing.collect(params, prefix + ".closing");
  nf.collect(params, prefix + ".nf");
  nc.collect(params, prefix + ".nc");
}

Tensor positional_encoding_2d(std::int64_t h, std::int64_t w, std::int64_t d_model) {
  if (d_model <= 0 || d_model % 4 != 0) {
    throw ParameterError("positional_encoding_2d: d_model must be a positive multiple of 4");
  }
  Tensor pe = Tensor::zeros({d_model, h, w});
  std::int64_t half = d_model / 2;
  double dm = static_cast<double>(d_model);
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      for (std::int64_t i = 0; 2 * i + 1 < half; ++i) {
        double div = std::pow(10000.0, 2.0 * static_cast<double>(i) / dm);
        double px = static_cast<double>(x) / div;
        double py = static_cast<double>(y) / div;
        pe.data()[((2 * i) * h + y) * w + x] = std::sin(px);
        pe.data()[((2 * i + 1) * h + y) * w + x] = std::cos(px);
        pe.data()[((half + 2 * i) * h + y) * w + x] = std::sin(py);
        pe.data()[((half + 2 * i + 1) * h + y) * w + x] = std::cos(py);
      }
    }
  }
  return pe;
}

FeatureSeq flatten_with_pe(const Tensor& fmap, const Tensor& pe, const Conv2dLayer* proj) {
  if (fmap.rank() != 3) throw DimensionError("flatten_with_pe: feature map must be [c,h,w]");
  Tensor mapped = fmap;
  if (proj != nullptr) mapped = proj->forward(fmap);
  if (mapped.shape() != pe.shape()) {
    throw DimensionError("flatten_with_pe: map " + shape_str(mapped.shape()) +
                         " vs positional encoding " + shape_str(pe.shape()));
  }
  std::int64_t d = mapped.dim(0), h = mapped.dim(1), w = mapped.dim(2);
  Tensor summed = add(mapped, pe);
  // [d,h,w] -> [h*w, d] with j = y*w + x
  Tensor grid = reshape(summed, {d, h * w});
  FeatureSeq seq;
  seq.values = transpose2d(grid);
  seq.height = h;
  seq.width = w;
  return seq;
}

Encoder::Encoder(const EncoderConfig& config, RngStream& rng) : cfg(config) {
  stem = StemBlock(cfg.c_mid, rng, cfg.norm_eps);
  gated_ds = GatedDSConvBlock(cfg.c_mid, 2, cfg.block2_stride_w(), rng, cfg.norm_eps);
  octave = OctaveBlock(cfg.c_mid, cfg.alpha_oct, rng, cfg.norm_eps);
  se_fuse = SEFuseBlock(cfg.c_mid, cfg.c_f, cfg.r_se, rng, cfg.norm_eps);
  gated_fcn = GatedConvFcnBlock(cfg.c_f, 2, cfg.block5_stride_w(), rng, cfg.norm_eps,
                                cfg.dropout_p);
}

Tensor Encoder::features_through_se(const Tensor& image) const {
  Tensor f1 = stem.forward(image);
  Tensor f2 = gated_ds.forward(f1);
  auto [high, low] = octave.forward(f2);
  return se_fuse.forward(high, low);
}

Tensor Encoder::encode(const Tensor& image, RngStream& rng, bool train) const {
  return gated_fcn.forward(features_through_se(image), rng, train);
}

void Encoder::collect(ParamMap& params, const std::string& prefix) const {
  stem.collect(params, prefix + ".stem");
  gated_ds.collect(params, prefix + ".gated_ds");
  octave.collect(params, prefix + ".octave");
  se_fuse.collect(params, prefix + ".se_fuse");
  gated_fcn.collect(params, prefix + ".gated_fcn");
}

}  // namespace scriptor
