#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dgnet/image.hpp"
#include "dgnet/rng.hpp"
#include "dgnet/utf8.hpp"

namespace dgnet {

struct EmptyGlyphError : Error {
  using Error::Error;
};
struct RangeError : Error {
  using Error::Error;
};
struct SlotOverflowError : Error {
  using Error::Error;
};
struct TooManyGlyphsError : Error {
  using Error::Error;
};
struct BadWeightsError : Error {
  using Error::Error;
};
struct MissingGlyphError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

// One character as a coverage bitmap: row-major height x width, values in [0,1].
struct Glyph {
  std::string char_id;
  int width = 0;
  int height = 0;
  std::vector<double> coverage;

  double at(int y, int x) const { return coverage[static_cast<std::size_t>(y) * width + x]; }
  double& at(int y, int x) { return coverage[static_cast<std::size_t>(y) * width + x]; }

  bool has_ink() const {
    for (double v : coverage)
      if (v > 0.0) return true;
    return false;
  }
};

struct LayoutPreset {
  std::string preset_id;
  int rows = 1;
  std::vector<Rect> slots;
  int canvas_w = 0;  // reference canvas the slot coordinates live on
  int canvas_h = 0;
};

// Characters composited over a uniform blue canvas.
struct TextImage {
  Image pixels;
  Rgb blue_color;
  std::string label;
  std::string layout_id;
};

// Character-only image: text pixels on support, zero elsewhere.
struct MaskImage {
  Image pixels;
  std::vector<std::uint8_t> support;  // row-major height x width, 0/1

  bool in_support(int y, int x) const {
    return support[static_cast<std::size_t>(y) * pixels.width + x] != 0;
  }
  std::size_t support_count() const {
    std::size_t n = 0;
    for (auto v : support) n += v != 0;
    return n;
  }
};

struct AugmentRanges {
  int width_min = 30, width_max = 60;
  int height_min = 60, height_max = 120;
  int morph_min = -2, morph_max = 2;
};

// ---------------------------------------------------------------------------
// Glyph augmentation: random resize within bounds, then grow/shrink the
// stroke support with a 3x3 (8-neighbourhood) structuring element.
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<double> morph_pass(const std::vector<double>& src, int w, int h, bool grow) {
  std::vector<double> dst(src.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double v = grow ? 0.0 : 1.0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int ny = y + dy, nx = x + dx;
          // Outside the bitmap counts as empty.
          const double nv = (ny < 0 || ny >= h || nx < 0 || nx >= w)
                                ? 0.0
                                : src[static_cast<std::size_t>(ny) * w + nx];
          v = grow ? std::max(v, nv) : std::min(v, nv);
        }
      dst[static_cast<std::size_t>(y) * w + x] = v;
    }
  return dst;
}

inline bool any_ink(const std::vector<double>& cov) {
  for (double v : cov)
    if (v > 0.0) return true;
  return false;
}

}  // namespace detail

inline Glyph augment_glyph(const Glyph& glyph, std::uint64_t seed, const AugmentRanges& ranges) {
  if (!glyph.has_ink()) throw EmptyGlyphError("augment_glyph: glyph '" + glyph.char_id +
                                              "' has no coverage");
  if (ranges.width_min > ranges.width_max || ranges.height_min > ranges.height_max ||
      ranges.morph_min > ranges.morph_max || ranges.width_min <= 0 || ranges.height_min <= 0)
    throw RangeError("augment_glyph: inverted or nonpositive ranges");

  Rng rng(seed);
  const int morph =
      static_cast<int>(rng.uniform_int(ranges.morph_min, ranges.morph_max));
  // Dilation pads the bitmap by `morph` on each side, so the resize target is
  // drawn from a range shrunk to keep the final dimensions inside the bounds.
  const int pad = std::max(morph, 0);
  const int w_hi = std::max(ranges.width_min, ranges.width_max - 2 * pad);
  const int h_hi = std::max(ranges.height_min, ranges.height_max - 2 * pad);
  const int target_w = static_cast<int>(rng.uniform_int(ranges.width_min, w_hi));
  const int target_h = static_cast<int>(rng.uniform_int(ranges.height_min, h_hi));

  Glyph out;
  out.char_id = glyph.char_id;
  out.width = target_w;
  out.height = target_h;
  out.coverage = resample_plane(glyph.coverage, glyph.width, glyph.height, target_w, target_h);
  for (double& v : out.coverage) v = std::min(std::max(v, 0.0), 1.0);

  if (morph > 0) {
    // Pad so boundary pixels gain their full neighbourhood.
    const int pw = target_w + 2 * morph, ph = target_h + 2 * morph;
    std::vector<double> padded(static_cast<std::size_t>(pw) * ph, 0.0);
    for (int y = 0; y < target_h; ++y)
      for (int x = 0; x < target_w; ++x)
        padded[static_cast<std::size_t>(y + morph) * pw + (x + morph)] = out.at(y, x);
    for (int i = 0; i < morph; ++i) padded = detail::morph_pass(padded, pw, ph, true);
    out.width = pw;
    out.height = ph;
    out.coverage = std::move(padded);
  } else if (morph < 0) {
    for (int i = 0; i < -morph; ++i) {
      std::vector<double> eroded =
          detail::morph_pass(out.coverage, out.width, out.height, false);
      if (!detail::any_ink(eroded)) break;  // never erode a glyph away entirely
      out.coverage = std::move(eroded);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Composition and mask extraction
// ---------------------------------------------------------------------------

inline void validate_layout(const LayoutPreset& preset) {
  for (std::size_t i = 0; i < preset.slots.size(); ++i) {
    const Rect& s = preset.slots[i];
    if (s.w <= 0 || s.h <= 0 || s.x < 0 || s.y < 0 || s.x + s.w > preset.canvas_w ||
        s.y + s.h > preset.canvas_h)
      throw RangeError("layout '" + preset.preset_id + "': slot " + std::to_string(i) +
                       " outside canvas");
    for (std::size_t j = i + 1; j < preset.slots.size(); ++j)
      if (interiors_intersect(s, preset.slots[j]))
        throw RangeError("layout '" + preset.preset_id + "': slots " + std::to_string(i) +
                         " and " + std::to_string(j) + " overlap");
  }
}

// Rescales slot coordinates onto a different canvas. Uses the floor transform
// on both edges, which preserves non-overlap and containment.
inline LayoutPreset scale_layout(const LayoutPreset& preset, int canvas_w, int canvas_h) {
  if (preset.canvas_w == canvas_w && preset.canvas_h == canvas_h) return preset;
  LayoutPreset out = preset;
  out.canvas_w = canvas_w;
  out.canvas_h = canvas_h;
  const double sx = static_cast<double>(canvas_w) / preset.canvas_w;
  const double sy = static_cast<double>(canvas_h) / preset.canvas_h;
  for (Rect& s : out.slots) {
    const int x1 = static_cast<int>(std::floor((s.x + s.w) * sx));
    const int y1 = static_cast<int>(std::floor((s.y + s.h) * sy));
    s.x = static_cast<int>(std::floor(s.x * sx));
    s.y = static_cast<int>(std::floor(s.y * sy));
    s.w = std::max(1, x1 - s.x);
    s.h = std::max(1, y1 - s.y);
  }
  validate_layout(out);
  return out;
}

inline TextImage compose_text_image(const std::vector<Glyph>& glyphs, const LayoutPreset& layout,
                                    int canvas_h, int canvas_w, Rgb blue_color,
                                    Rgb text_color = {255, 255, 255}) {
  if (glyphs.size() > layout.slots.size())
    throw TooManyGlyphsError("compose_text_image: " + std::to_string(glyphs.size()) +
                             " glyphs for " + std::to_string(layout.slots.size()) + " slots");
  for (const Rect& s : layout.slots)
    if (s.x + s.w > canvas_w || s.y + s.h > canvas_h)
      throw RangeError("compose_text_image: layout '" + layout.preset_id +
                       "' does not fit the canvas");

  TextImage out;
  out.pixels = Image::filled(canvas_w, canvas_h, blue_color);
  out.blue_color = blue_color;
  out.layout_id = layout.preset_id;

  for (std::size_t i = 0; i < glyphs.size(); ++i) {
    const Glyph& g = glyphs[i];
    const Rect& slot = layout.slots[i];
    if (g.width > slot.w || g.height > slot.h)
      throw SlotOverflowError("compose_text_image: glyph '" + g.char_id + "' (" +
                              std::to_string(g.width) + "x" + std::to_string(g.height) +
                              ") exceeds slot " + std::to_string(i) + " (" +
                              std::to_string(slot.w) + "x" + std::to_string(slot.h) + ")");
    const int x0 = slot.x + (slot.w - g.width) / 2;
    const int y0 = slot.y + (slot.h - g.height) / 2;
    for (int y = 0; y < g.height; ++y)
      for (int x = 0; x < g.width; ++x) {
        const double a = g.at(y, x);
        if (a <= 0.0) continue;
        const std::uint8_t* bg = &out.pixels.at(y0 + y, x0 + x, 0);
        const std::uint8_t blend[3] = {
            static_cast<std::uint8_t>(std::lround(bg[0] * (1.0 - a) + text_color.r * a)),
            static_cast<std::uint8_t>(std::lround(bg[1] * (1.0 - a) + text_color.g * a)),
            static_cast<std::uint8_t>(std::lround(bg[2] * (1.0 - a) + text_color.b * a))};
        for (int c = 0; c < 3; ++c) out.pixels.at(y0 + y, x0 + x, c) = blend[c];
      }
    out.label += g.char_id;
  }
  return out;
}

// Support is every pixel whose max channel deviation from the blue canvas
// exceeds the tolerance; mask pixels copy the text image there, zero elsewhere.
inline MaskImage extract_mask(const TextImage& text, int tolerance = 8) {
  MaskImage out;
  const Image& src = text.pixels;
  out.pixels = Image(src.width, src.height, 3);
  out.support.assign(static_cast<std::size_t>(src.width) * src.height, 0);
  const int blue[3] = {text.blue_color.r, text.blue_color.g, text.blue_color.b};
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x) {
      int dev = 0;
      for (int c = 0; c < 3; ++c)
        dev = std::max(dev, std::abs(static_cast<int>(src.at(y, x, c)) - blue[c]));
      if (dev > tolerance) {
        out.support[static_cast<std::size_t>(y) * src.width + x] = 1;
        for (int c = 0; c < 3; ++c) out.pixels.at(y, x, c) = src.at(y, x, c);
      }
    }
  return out;
}

// The Script baseline: paste mask pixels onto a background template.
inline Image script_composite(const MaskImage& mask, const Image& background) {
  if (mask.pixels.width != background.width || mask.pixels.height != background.height)
    throw ShapeMismatchError("script_composite: mask " + std::to_string(mask.pixels.width) + "x" +
                             std::to_string(mask.pixels.height) + " vs template " +
                             std::to_string(background.width) + "x" +
                             std::to_string(background.height));
  Image out(background.width, background.height, 3);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      const bool on = mask.in_support(y, x);
      for (int c = 0; c < 3; ++c)
        out.at(y, x, c) = on ? mask.pixels.at(y, x, c)
                             : background.at(y, x, background.channels == 1 ? 0 : c);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Plate label sampling
// ---------------------------------------------------------------------------

// Letters and alphanumerics used by the default plate grammar; 'I' and 'O'
// are excluded to match real registration alphabets.
inline const std::vector<std::string>& plate_letters() {
  static const std::vector<std::string> v = [] {
    std::vector<std::string> out;
    for (char c = 'A'; c <= 'Z'; ++c)
      if (c != 'I' && c != 'O') out.emplace_back(1, c);
    return out;
  }();
  return v;
}

inline const std::vector<std::string>& plate_alphanumerics() {
  static const std::vector<std::string> v = [] {
    std::vector<std::string> out;
    for (char c = '0'; c <= '9'; ++c) out.emplace_back(1, c);
    for (const std::string& s : plate_letters()) out.push_back(s);
    return out;
  }();
  return v;
}

// Province character + one letter + five alphanumerics.
inline std::string sample_plate_string(std::uint64_t seed,
                                       const std::map<std::string, double>& province_weights) {
  if (province_weights.empty()) throw BadWeightsError("sample_plate_string: no provinces");
  std::vector<std::string> provinces;
  std::vector<double> weights;
  for (const auto& [ch, w] : province_weights) {
    if (w < 0.0) throw BadWeightsError("sample_plate_string: negative weight for " + ch);
    provinces.push_back(ch);
    weights.push_back(w);
  }
  Rng rng(seed);
  std::string out;
  try {
    out = provinces[rng.weighted_index(weights)];
  } catch (const Error&) {
    throw BadWeightsError("sample_plate_string: all province weights are zero");
  }
  const auto& letters = plate_letters();
  const auto& alnum = plate_alphanumerics();
  out += letters[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(letters.size()) - 1))];
  for (int i = 0; i < 5; ++i)
    out += alnum[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(alnum.size()) - 1))];
  return out;
}

// ---------------------------------------------------------------------------
// Atlas and layout files
// ---------------------------------------------------------------------------

// Atlas directory layout: one grayscale PNG per character plus index.json
// mapping each character to its file name.
struct GlyphAtlas {
  std::map<std::string, Glyph> glyphs;

  const Glyph& get(const std::string& char_id) const {
    auto it = glyphs.find(char_id);
    if (it == glyphs.end())
      throw MissingGlyphError("atlas: no glyph for character '" + char_id + "'");
    return it->second;
  }

  bool contains(const std::string& char_id) const { return glyphs.count(char_id) > 0; }

  static GlyphAtlas load(const std::string& dir) {
    const std::filesystem::path root(dir);
    std::ifstream in(root / "index.json");
    if (!in) throw IoError("atlas: cannot open " + (root / "index.json").string());
    nlohmann::json index;
    try {
      in >> index;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("atlas: bad index.json: " + std::string(e.what()));
    }
    GlyphAtlas atlas;
    for (const auto& [ch, file] : index.items()) {
      const Image img = load_png((root / file.get<std::string>()).string());
      if (img.channels != 1)
        throw ParseError("atlas: glyph file for '" + ch + "' is not grayscale");
      Glyph g;
      g.char_id = ch;
      g.width = img.width;
      g.height = img.height;
      g.coverage.resize(img.pixels.size());
      for (std::size_t i = 0; i < img.pixels.size(); ++i) g.coverage[i] = img.pixels[i] / 255.0;
      atlas.glyphs.emplace(ch, std::move(g));
    }
    return atlas;
  }
};

// Layout preset file: {"canvas_w":..,"canvas_h":..,"presets":[{"preset_id":..,
// "rows":..,"slots":[[x,y,w,h],..]},..]}
inline std::vector<LayoutPreset> load_layouts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("layouts: cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("layouts: " + std::string(e.what()));
  }
  std::vector<LayoutPreset> out;
  const int cw = doc.at("canvas_w").get<int>();
  const int chh = doc.at("canvas_h").get<int>();
  for (const auto& p : doc.at("presets")) {
    LayoutPreset preset;
    preset.preset_id = p.at("preset_id").get<std::string>();
    preset.rows = p.at("rows").get<int>();
    preset.canvas_w = cw;
    preset.canvas_h = chh;
    for (const auto& s : p.at("slots"))
      preset.slots.push_back(
          Rect{s.at(0).get<int>(), s.at(1).get<int>(), s.at(2).get<int>(), s.at(3).get<int>()});
    validate_layout(preset);
    out.push_back(std::move(preset));
  }
  if (out.empty()) throw ParseError("layouts: no presets in " + path);
  return out;
}

// Province character file: one "character weight" pair per line, '#' comments.
inline std::map<std::string, double> load_province_weights(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("provinces: cannot open " + path);
  std::map<std::string, double> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string ch;
    double w = 1.0;
    ls >> ch >> w;
    if (ch.empty()) continue;
    out[ch] = w;
  }
  if (out.empty()) throw ParseError("provinces: no entries in " + path);
  return out;
}

}  // namespace dgnet
