#pragma once

#include <optional>
#include <string>

#include "scriptor/nn.hpp"

namespace scriptor {

enum class ScaleLevel { kLine, kParagraph, kSinglePage, kDoublePage, kTriplePage };

const char* scale_level_name(ScaleLevel level);
ScaleLevel scale_level_from_name(const std::string& name);
int scale_level_columns(ScaleLevel level);  // reading columns: 1, 2 or 3

struct EncoderConfig {
  ScaleLevel level = ScaleLevel::kSinglePage;
  std::int64_t c_mid = 32;   // working width of blocks 1-4
  std::int64_t c_f = 64;     // output channels, set by scale level
  int width_divisor = 8;     // overall W divisor, set by scale level
  double alpha_oct = 0.5;    // fraction of channels routed at half resolution
  std::int64_t r_se = 4;     // squeeze-excitation reduction
  double dropout_p = 0.2;
  double norm_eps = 1e-5;

  static EncoderConfig for_level(ScaleLevel level, std::int64_t c_mid = 32);
  // strides of the two post-stem reduction stages
  int block2_stride_w() const { return width_divisor >= 16 ? 2 : 1; }
  int block5_stride_w() const { return width_divisor >= 32 ? 2 : 1; }
};

// Block 1: three stride-2 conv stages then a 3x3 conv stage; /8 in both axes.
struct StemBlock {
  Conv2dLayer conv7, conv3a, conv3b, conv_out;
  InstanceNorm2d n1, n2, n3, n4;

  StemBlock() = default;
  StemBlock(std::int64_t c_mid, RngStream& rng, double eps);
  Tensor forward(const Tensor& x) const;
  void collect(ParamMap& params, const std::string& prefix) const;
};

// Block 2: two depthwise-separable branches, sigmoid gate times local path.
struct GatedDSConvBlock {
  DepthwiseSeparable ds_gate, ds_local;
  InstanceNorm2d ng, nl;
  Conv2dLayer gate_mix, local_mix;  // 1x1

  GatedDSConvBlock() = default;
  GatedDSConvBlock(std::int64_t c, int stride_h, int stride_w, RngStream& rng, double eps);
  Tensor forward(const Tensor& x) const;
  void collect(ParamMap& params, const std::string& prefix) const;
};

// Block 3: octave split; four conv paths between full and half resolution.
struct OctaveBlock {
  Conv2dLayer hh, hl, lh, ll;
  InstanceNorm2d nh, nl;
  std::int64_t c_high = 0, c_low = 0;

  OctaveBlock() = default;
  OctaveBlock(std::int64_t c, double alpha_oct, RngStream& rng, double eps);
  std::pair<Tensor, Tensor> forward(const Tensor& x) const;  // (high, low)
  void collect(ParamMap& params, const std::string& prefix) const;
};

// Block 4: upsample low branch, concat, squeeze-excite, project to c_f.
struct SEFuseBlock {
  SqueezeExcite se;
  Conv2dLayer proj;
  InstanceNorm2d np;

  SEFuseBlock() = default;
  SEFuseBlock(std::int64_t c, std::int64_t c_f, std::int64_t r_se, RngStream& rng, double eps);
  Tensor forward(const Tensor& high, const Tensor& low) const;
  void collect(ParamMap& params, const std::string& prefix) const;
};

// Block 5: gated conv then a closing strided conv stage; MixDropout when training.
struct GatedConvFcnBlock {
  Conv2dLayer feat, mask, closing;
  InstanceNorm2d nf, nc;
  MixDropout drop;

  GatedConvFcnBlock() = default;
  GatedConvFcnBlock(std::int64_t c_f, int stride_h, int stride_w, RngStream& rng, double eps,
                    double dropout_p);
  Tensor gated(const Tensor& x) const;
  Tensor forward(const Tensor& x, RngStream& rng, bool train) const;
  void collect(ParamMap& params, const std::string& prefix) const;
};

// Interleaved sin/cos over x in the first half of channels, y in the second.
// d_model must be divisible by 4; values are parameter-free and deterministic.
Tensor positional_encoding_2d(std::int64_t h, std::int64_t w, std::int64_t d_model);

struct FeatureSeq {
  Tensor values;  // [h*w, d]
  std::int64_t height = 0, width = 0;
};

// Row-major flatten (j = y*w + x) of map+PE; optional 1x1 projection first
// when channel count differs from the PE width.
FeatureSeq flatten_with_pe(const Tensor& fmap, const Tensor& pe, const Conv2dLayer* proj);

struct Encoder {
  EncoderConfig cfg;
  StemBlock stem;
  GatedDSConvBlock gated_ds;
  OctaveBlock octave;
  SEFuseBlock se_fuse;
  GatedConvFcnBlock gated_fcn;

  Encoder() = default;
  Encoder(const EncoderConfig& config, RngStream& rng);
  // Blocks 1-4; the feature map the adaptive pipeline consumes.
  Tensor features_through_se(const Tensor& image) const;
  // All five blocks; honors the H/32 x W/divisor shape contract.
  Tensor encode(const Tensor& image, RngStream& rng, bool train) const;
  void collect(ParamMap& params, const std::string& prefix) const;
};

}  // namespace scriptor
