#include "scriptor/synth.hpp"

#include <array>
#include <cmath>
#include <map>

#include "scriptor/layout.hpp"

namespace scriptor {

void SynthConfig::validate() const {
  if (alphabet.empty()) throw ParameterError("synthetic alphabet is empty");
  if (line_height < 16 || line_width < 32) throw ParameterError("line canvas too small");
  if (min_chars < 1 || max_chars < min_chars) throw ParameterError("bad char count range");
  if (stroke_min < 1 || stroke_max < stroke_min) throw ParameterError("bad stroke range");
  if (spacing_min < 0 || spacing_max < spacing_min) throw ParameterError("bad spacing range");
  if (lines_min < 1 || lines_max < lines_min) throw ParameterError("bad line count range");
  if (slant_max < 0.0 || jitter_max < 0.0) throw ParameterError("negative augmentation range");
  if (page_width < 64 || page_height < 64) throw ParameterError("page canvas too small");
  for (char c : alphabet)
    if (!glyph_known(c)) throw ParameterError(std::string("no glyph for '") + c + "'");
}

namespace {

using Seg = std::array<double, 4>;  // x1, y1, x2, y2 in a unit box, y down

const std::map<char, std::vector<Seg>>& glyph_table() {
  static const std::map<char, std::vector<Seg>> table = {
      {'a', {{0.7, 0.4, 0.3, 0.4}, {0.3, 0.4, 0.25, 0.7}, {0.25, 0.7, 0.4, 0.9},
             {0.4, 0.9, 0.7, 0.85}, {0.7, 0.4, 0.7, 0.9}}},
      {'b', {{0.25, 0.1, 0.25, 0.9}, {0.25, 0.5, 0.6, 0.45}, {0.6, 0.45, 0.75, 0.65},
             {0.75, 0.65, 0.6, 0.9}, {0.6, 0.9, 0.25, 0.85}}},
      {'c', {{0.75, 0.45, 0.45, 0.4}, {0.45, 0.4, 0.25, 0.6}, {0.25, 0.6, 0.45, 0.9},
             {0.45, 0.9, 0.75, 0.85}}},
      {'d', {{0.75, 0.1, 0.75, 0.9}, {0.75, 0.5, 0.4, 0.45}, {0.4, 0.45, 0.25, 0.65},
             {0.25, 0.65, 0.4, 0.9}, {0.4, 0.9, 0.75, 0.85}}},
      {'e', {{0.25, 0.65, 0.75, 0.6}, {0.75, 0.6, 0.65, 0.42}, {0.65, 0.42, 0.35, 0.42},
             {0.35, 0.42, 0.25, 0.65}, {0.25, 0.65, 0.4, 0.9}, {0.4, 0.9, 0.75, 0.85}}},
      {'f', {{0.7, 0.15, 0.45, 0.1}, {0.45, 0.1, 0.35, 0.3}, {0.35, 0.3, 0.35, 0.9},
             {0.2, 0.45, 0.6, 0.45}}},
      {'g', {{0.7, 0.4, 0.35, 0.4}, {0.35, 0.4, 0.25, 0.6}, {0.25, 0.6, 0.4, 0.75},
             {0.4, 0.75, 0.7, 0.7}, {0.7, 0.4, 0.7, 0.9}, {0.7, 0.9, 0.4, 0.95}}},
      {'h', {{0.25, 0.1, 0.25, 0.9}, {0.25, 0.5, 0.6, 0.42}, {0.6, 0.42, 0.75, 0.55},
             {0.75, 0.55, 0.75, 0.9}}},
      {'i', {{0.5, 0.15, 0.5, 0.22}, {0.5, 0.4, 0.5, 0.9}}},
      {'j', {{0.6, 0.15, 0.6, 0.22}, {0.6, 0.4, 0.6, 0.85}, {0.6, 0.85, 0.45, 0.95},
             {0.45, 0.95, 0.3, 0.9}}},
      {'k', {{0.25, 0.1, 0.25, 0.9}, {0.7, 0.4, 0.25, 0.65}, {0.4, 0.58, 0.75, 0.9}}},
      {'l', {{0.45, 0.1, 0.45, 0.85}, {0.45, 0.85, 0.6, 0.9}}},
      {'m', {{0.2, 0.4, 0.2, 0.9}, {0.2, 0.5, 0.35, 0.4}, {0.35, 0.4, 0.5, 0.5},
             {0.5, 0.5, 0.5, 0.9}, {0.5, 0.5, 0.65, 0.4}, {0.65, 0.4, 0.8, 0.5},
             {0.8, 0.5, 0.8, 0.9}}},
      {'n', {{0.25, 0.4, 0.25, 0.9}, {0.25, 0.5, 0.5, 0.4}, {0.5, 0.4, 0.75, 0.5},
             {0.75, 0.5, 0.75, 0.9}}},
      {'o', {{0.35, 0.4, 0.65, 0.4}, {0.65, 0.4, 0.78, 0.65}, {0.78, 0.65, 0.65, 0.9},
             {0.65, 0.9, 0.35, 0.9}, {0.35, 0.9, 0.22, 0.65}, {0.22, 0.65, 0.35, 0.4}}},
      {'p', {{0.25, 0.4, 0.25, 0.95}, {0.25, 0.45, 0.6, 0.4}, {0.6, 0.4, 0.75, 0.6},
             {0.75, 0.6, 0.6, 0.8}, {0.6, 0.8, 0.25, 0.75}}},
      {'q', {{0.75, 0.4, 0.75, 0.95}, {0.75, 0.45, 0.4, 0.4}, {0.4, 0.4, 0.25, 0.6},
             {0.25, 0.6, 0.4, 0.8}, {0.4, 0.8, 0.75, 0.75}, {0.75, 0.95, 0.88, 0.88}}},
      {'r', {{0.3, 0.4, 0.3, 0.9}, {0.3, 0.55, 0.55, 0.4}, {0.55, 0.4, 0.72, 0.45}}},
      {'s', {{0.72, 0.45, 0.4, 0.4}, {0.4, 0.4, 0.28, 0.55}, {0.28, 0.55, 0.68, 0.72},
             {0.68, 0.72, 0.55, 0.9}, {0.55, 0.9, 0.25, 0.85}}},
      {'t', {{0.45, 0.15, 0.45, 0.8}, {0.45, 0.8, 0.6, 0.9}, {0.25, 0.4, 0.65, 0.4}}},
      {'u', {{0.25, 0.4, 0.25, 0.75}, {0.25, 0.75, 0.4, 0.9}, {0.4, 0.9, 0.7, 0.85},
             {0.7, 0.4, 0.7, 0.9}}},
      {'v', {{0.25, 0.4, 0.5, 0.9}, {0.5, 0.9, 0.75, 0.4}}},
      {'w', {{0.2, 0.4, 0.35, 0.9}, {0.35, 0.9, 0.5, 0.55}, {0.5, 0.55, 0.65, 0.9},
             {0.65, 0.9, 0.8, 0.4}}},
      {'x', {{0.25, 0.4, 0.75, 0.9}, {0.75, 0.4, 0.25, 0.9}}},
      {'y', {{0.25, 0.4, 0.5, 0.7}, {0.75, 0.4, 0.35, 0.95}}},
      {'z', {{0.25, 0.4, 0.72, 0.4}, {0.72, 0.4, 0.25, 0.9}, {0.25, 0.9, 0.75, 0.9}}},
      {'0', {{0.28, 0.1, 0.72, 0.1}, {0.72, 0.1, 0.72, 0.9}, {0.72, 0.9, 0.28, 0.9},
             {0.28, 0.9, 0.28, 0.1}, {0.28, 0.75, 0.72, 0.25}}},
      {'1', {{0.3, 0.25, 0.5, 0.1}, {0.5, 0.1, 0.5, 0.9}, {0.3, 0.9, 0.7, 0.9}}},
      {'2', {{0.2, 0.2, 0.5, 0.1}, {0.5, 0.1, 0.8, 0.2}, {0.8, 0.2, 0.8, 0.4},
             {0.8, 0.4, 0.2, 0.9}, {0.2, 0.9, 0.8, 0.9}}},
      {'3', {{0.2, 0.1, 0.8, 0.1}, {0.8, 0.1, 0.45, 0.5}, {0.45, 0.5, 0.8, 0.65},
             {0.8, 0.65, 0.6, 0.9}, {0.6, 0.9, 0.2, 0.85}}},
      {'4', {{0.7, 0.9, 0.7, 0.1}, {0.7, 0.1, 0.2, 0.6}, {0.2, 0.6, 0.9, 0.6}}},
      {'5', {{0.8, 0.1, 0.2, 0.1}, {0.2, 0.1, 0.2, 0.5}, {0.2, 0.5, 0.7, 0.5},
             {0.7, 0.5, 0.8, 0.7}, {0.8, 0.7, 0.6, 0.9}, {0.6, 0.9, 0.2, 0.85}}},
      {'6', {{0.7, 0.1, 0.3, 0.4}, {0.3, 0.4, 0.2, 0.7}, {0.2, 0.7, 0.4, 0.9},
             {0.4, 0.9, 0.7, 0.85}, {0.7, 0.85, 0.75, 0.6}, {0.75, 0.6, 0.25, 0.55}}},
      {'7', {{0.2, 0.1, 0.8, 0.1}, {0.8, 0.1, 0.4, 0.9}, {0.3, 0.5, 0.7, 0.5}}},
      {'8', {{0.3, 0.1, 0.7, 0.1}, {0.7, 0.1, 0.7, 0.5}, {0.7, 0.5, 0.3, 0.5},
             {0.3, 0.5, 0.3, 0.1}, {0.25, 0.5, 0.25, 0.9}, {0.25, 0.9, 0.75, 0.9},
             {0.75, 0.9, 0.75, 0.5}}},
      {'9', {{0.3, 0.1, 0.7, 0.1}, {0.3, 0.1, 0.3, 0.5}, {0.3, 0.5, 0.7, 0.5},
             {0.7, 0.1, 0.7, 0.9}, {0.7, 0.9, 0.35, 0.9}}},
  };
  return table;
}

void stamp(ImageU8& canvas, std::int64_t cy, std::int64_t cx, std::int64_t radius) {
  for (std::int64_t y = cy - radius + 1; y < cy + radius; ++y) {
    for (std::int64_t x = cx - radius + 1; x < cx + radius; ++x) {
      if (y < 0 || y >= canvas.height || x < 0 || x >= canvas.width) continue;
      canvas.at(y, x) = 0;
    }
  }
}

void draw_segment(ImageU8& canvas, double x1, double y1, double x2, double y2,
                  std::int64_t radius) {
  double len = std::hypot(x2 - x1, y2 - y1);
  std::int64_t steps = std::max<std::int64_t>(1, static_cast<std::int64_t>(len * 3.0));
  for (std::int64_t s = 0; s <= steps; ++s) {
    double t = static_cast<double>(s) / static_cast<double>(steps);
    double x = x1 + t * (x2 - x1);
    double y = y1 + t * (y2 - y1);
    stamp(canvas, static_cast<std::int64_t>(std::lround(y)),
          static_cast<std::int64_t>(std::lround(x)), radius);
  }
}

std::string random_word(RngStream& rng, const std::string& alphabet, std::int64_t min_len,
                        std::int64_t max_len) {
  std::string w;
  std::int64_t len = rng.uniform_int(min_len, max_len);
  for (std::int64_t i = 0; i < len; ++i)
    w.push_back(alphabet[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(alphabet.size()) - 1))]);
  return w;
}

// words separated by single spaces, total length capped
std::string random_words(RngStream& rng, const std::string& alphabet, std::int64_t max_total) {
  std::string out;
  while (true) {
    std::string w = random_word(rng, alphabet, 2, 5);
    std::int64_t extra = static_cast<std::int64_t>(w.size()) + (out.empty() ? 0 : 1);
    if (static_cast<std::int64_t>(out.size()) + extra > max_total) break;
    if (!out.empty()) out.push_back(' ');
    out += w;
    if (rng.bernoulli(0.25)) break;
  }
  if (out.empty()) out = random_word(rng, alphabet, 1, std::max<std::int64_t>(1, max_total));
  return out;
}

}  // namespace

bool glyph_known(char c) { return c == ' ' || glyph_table().count(c) > 0; }

std::int64_t render_text_line(ImageU8& canvas, const std::string& text, std::int64_t x0,
                              std::int64_t y0, std::int64_t glyph_h, RngStream& rng,
                              const SynthConfig& cfg) {
  std::int64_t glyph_w = std::max<std::int64_t>(4, (glyph_h * 3) / 5);
  double slant = rng.uniform(-cfg.slant_max, cfg.slant_max);
  std::int64_t radius = rng.uniform_int(cfg.stroke_min, cfg.stroke_max);
  std::int64_t x = x0;
  for (char c : text) {
    if (c == ' ') {
      x += glyph_w / 2 + rng.uniform_int(cfg.spacing_min, cfg.spacing_max);
      continue;
    }
    auto it = glyph_table().find(c);
    if (it == glyph_table().end())
      throw ParameterError(std::string("no glyph for '") + c + "'");
    double jitter = rng.uniform(-cfg.jitter_max, cfg.jitter_max);
    for (const Seg& seg : it->second) {
      double ya = y0 + jitter + seg[1] * glyph_h;
      double yb = y0 + jitter + seg[3] * glyph_h;
      // shear proportional to height above the glyph base
      double xa = x + seg[0] * glyph_w + slant * (glyph_h - seg[1] * glyph_h);
      double xb = x + seg[2] * glyph_w + slant * (glyph_h - seg[3] * glyph_h);
      draw_segment(canvas, xa, ya, xb, yb, radius);
    }
    x += glyph_w + rng.uniform_int(cfg.spacing_min, cfg.spacing_max);
  }
  return x - x0;
}

namespace {

SyntheticSample line_sample(const SynthConfig& cfg, RngStream& rng) {
  SyntheticSample s;
  s.level = ScaleLevel::kLine;
  s.image = make_image(cfg.line_height, cfg.line_width, 1, 255);
  std::int64_t glyph_h = cfg.line_height / 2;
  std::int64_t glyph_w = std::max<std::int64_t>(4, (glyph_h * 3) / 5);
  std::int64_t budget = (cfg.line_width - 8) / (glyph_w + cfg.spacing_max);
  std::int64_t n = rng.uniform_int(cfg.min_chars, std::min(cfg.max_chars, budget));
  s.label = random_word(rng, cfg.alphabet, n, n);
  std::int64_t y0 = (cfg.line_height - glyph_h) / 2;
  render_text_line(s.image, s.label, 4, y0, glyph_h, rng, cfg);
  return s;
}

SyntheticSample paragraph_sample(const SynthConfig& cfg, RngStream& rng) {
  SyntheticSample s;
  s.level = ScaleLevel::kParagraph;
  std::int64_t lines = rng.uniform_int(cfg.lines_min, cfg.lines_max);
  s.image = make_image(cfg.line_height * lines, cfg.line_width, 1, 255);
  std::int64_t glyph_h = cfg.line_height / 2;
  std::int64_t glyph_w = std::max<std::int64_t>(4, (glyph_h * 3) / 5);
  std::int64_t budget = (cfg.line_width - 8) / (glyph_w / 2 + cfg.spacing_max);
  for (std::int64_t l = 0; l < lines; ++l) {
    std::string text = random_words(rng, cfg.alphabet, std::max<std::int64_t>(3, budget));
    if (l > 0) s.label.push_back('\n');
    s.label += text;
    std::int64_t y0 = l * cfg.line_height + (cfg.line_height - glyph_h) / 2;
    render_text_line(s.image, text, 4, y0, glyph_h, rng, cfg);
  }
  return s;
}

// renders one page column into the canvas and returns its token substring
std::string render_page(ImageU8& canvas, std::int64_t x_off, std::int64_t page_w,
                        const SynthConfig& cfg, RngStream& rng) {
  const std::int64_t glyph_h = 16;
  const std::int64_t line_step = 24;
  const std::int64_t margin = 8;
  std::int64_t y = margin;
  std::string tokens = "<P>";

  std::string number = random_word(rng, "0123456789", 1, 3);
  std::int64_t num_w =
      static_cast<std::int64_t>(number.size()) * (((glyph_h * 3) / 5) + 2) + margin;
  render_text_line(canvas, number, x_off + page_w - num_w, y, glyph_h, rng, cfg);
  tokens += "<N>" + number + "</N>";
  y += line_step;

  std::int64_t budget = (page_w - 2 * margin) / ((((glyph_h * 3) / 5)) / 2 + cfg.spacing_max);
  auto line_fits = [&](std::int64_t at) { return at + glyph_h + margin <= canvas.height; };
  std::int64_t sections = rng.uniform_int(1, 2);
  for (std::int64_t sec = 0; sec < sections; ++sec) {
    if (sec > 0 && !line_fits(y)) break;  // always emit one section, more if space allows
    tokens += "<S>";
    // annotation only when a body line still fits below it
    if (rng.bernoulli(0.4) && line_fits(y + line_step)) {
      std::string note = random_word(rng, cfg.alphabet, 2, 5);
      render_text_line(canvas, note, x_off + margin, y, glyph_h, rng, cfg);
      tokens += "<A>" + note + "</A>";
      y += line_step;
    }
    std::int64_t lines = rng.uniform_int(cfg.lines_min, cfg.lines_max);
    std::string body;
    for (std::int64_t l = 0; l < lines; ++l) {
      if (l > 0 && !line_fits(y)) break;  // the first body line always renders
      std::string text = random_words(rng, cfg.alphabet, std::max<std::int64_t>(3, budget));
      if (!body.empty()) body.push_back('\n');
      body += text;
      render_text_line(canvas, text, x_off + margin, y, glyph_h, rng, cfg);
      y += line_step;
    }
    tokens += "<B>" + body + "</B></S>";
  }
  tokens += "</P>";
  return tokens;
}

SyntheticSample page_sample(const SynthConfig& cfg, ScaleLevel level, RngStream& rng) {
  SyntheticSample s;
  s.level = level;
  int columns = scale_level_columns(level);
  s.image = make_image(cfg.page_height, cfg.page_width * columns, 1, 255);
  s.label = "<D>";
  for (int p = 0; p < columns; ++p)
    s.label += render_page(s.image, p * cfg.page_width, cfg.page_width, cfg, rng);
  s.label += "</D>";
  return s;
}

}  // namespace

SyntheticSample synth_sample(const SynthConfig& cfg, ScaleLevel level, std::uint64_t seed,
                             std::int64_t index) {
  cfg.validate();
  RngStream rng(splitmix64(derive_seed(seed, "synth") +
                           0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(index + 1)));
  SyntheticSample s;
  switch (level) {
    case ScaleLevel::kLine: s = line_sample(cfg, rng); break;
    case ScaleLevel::kParagraph: s = paragraph_sample(cfg, rng); break;
    default: s = page_sample(cfg, level, rng); break;
  }
  s.seed = seed;
  return s;
}

std::vector<SyntheticSample> generate_synthetic(const SynthConfig& cfg, ScaleLevel level,
                                                std::int64_t count, std::uint64_t seed) {
  if (count < 0) throw ParameterError("negative sample count");
  cfg.validate();
  std::vector<SyntheticSample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) out.push_back(synth_sample(cfg, level, seed, i));
  return out;
}

}  // namespace scriptor
