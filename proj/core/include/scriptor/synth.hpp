#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scriptor/encoder.hpp"
#include "scriptor/image.hpp"
#include "scriptor/rng.hpp"

namespace scriptor {

// Handwriting-style renderer built from stroke segments, no font files. Each
// glyph is a polyline set in a unit box, drawn with randomized slant, stroke
// width, baseline jitter, and spacing.
struct SynthConfig {
  std::string alphabet = "abcdefghijklmnopqrstuvwxyz0123456789";
  std::int64_t line_height = 32;
  std::int64_t line_width = 128;
  std::int64_t min_chars = 1;
  std::int64_t max_chars = 8;
  double slant_max = 0.2;        // horizontal shear per vertical pixel
  std::int64_t stroke_min = 1;   // stroke radius in pixels
  std::int64_t stroke_max = 2;
  double jitter_max = 2.0;       // baseline offset in pixels
  std::int64_t spacing_min = 1;  // extra advance between glyphs
  std::int64_t spacing_max = 3;
  std::int64_t lines_min = 2;    // lines per paragraph or section body
  std::int64_t lines_max = 3;
  std::int64_t page_width = 256;
  std::int64_t page_height = 256;

  void validate() const;  // ParameterError on empty alphabet or bad ranges
};

struct SyntheticSample {
  ImageU8 image;      // grayscale, ink 0 on white 255
  std::string label;  // plain text; page levels carry layout tags
  ScaleLevel level = ScaleLevel::kLine;
  std::uint64_t seed = 0;
};

// Does the glyph table cover this character?
bool glyph_known(char c);

// Renders text into an existing canvas at (x0, y0); returns the advance width.
// Exposed for tests; generate_* are the main entry points.
std::int64_t render_text_line(ImageU8& canvas, const std::string& text, std::int64_t x0,
                              std::int64_t y0, std::int64_t glyph_h, RngStream& rng,
                              const SynthConfig& cfg);

// One sample, deterministic in (cfg, level, seed, index).
SyntheticSample synth_sample(const SynthConfig& cfg, ScaleLevel level, std::uint64_t seed,
                             std::int64_t index);

std::vector<SyntheticSample> generate_synthetic(const SynthConfig& cfg, ScaleLevel level,
                                                std::int64_t count, std::uint64_t seed);

}  // namespace scriptor
