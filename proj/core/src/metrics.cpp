#include "scriptor/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace scriptor {

std::vector<char32_t> utf8_code_points(const std::string& text) {
  std::vector<char32_t> out;
  std::size_t i = 0;
  while (i < text.size()) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    std::size_t extra;
    char32_t cp;
    if (c < 0x80) {
      extra = 0;
      cp = c;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      throw ParseError("malformed utf-8 lead byte", i);
    }
    if (i + extra >= text.size()) throw ParseError("truncated utf-8 sequence", i);
    for (std::size_t k = 1; k <= extra; ++k) {
      unsigned char cc = static_cast<unsigned char>(text[i + k]);
      if ((cc & 0xC0) != 0x80) throw ParseError("malformed utf-8 continuation", i + k);
      cp = (cp << 6) | (cc & 0x3F);
    }
    out.push_back(cp);
    i += extra + 1;
  }
  return out;
}

std::int64_t levenshtein_chars(const std::string& a, const std::string& b) {
  return levenshtein(utf8_code_points(a), utf8_code_points(b));
}

std::string strip_layout_tags(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '<') {
      std::size_t j = i + 1;
      if (j < text.size() && text[j] == '/') ++j;
      if (j + 1 < text.size() && std::string("DPSNAB").find(text[j]) != std::string::npos &&
          text[j + 1] == '>') {
        i = j + 2;
        continue;
      }
    }
    out.push_back(text[i]);
    ++i;
  }
  return out;
}

std::vector<std::string> tokenize_level(const std::string& text, TextLevel level) {
  std::vector<std::string> out;
  auto split_on = [&](auto is_sep) {
    std::string cur;
    for (char c : text) {
      if (is_sep(c)) {
        if (!cur.empty()) out.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    if (!cur.empty()) out.push_back(cur);
  };
  switch (level) {
    case TextLevel::character: {
      for (char32_t cp : utf8_code_points(text)) {
        // keep each code point as its own token
        std::string one;
        if (cp < 0x80) {
          one.push_back(static_cast<char>(cp));
        } else {
          one = "U+" + std::to_string(static_cast<std::uint32_t>(cp));
        }
        out.push_back(one);
      }
      break;
    }
    case TextLevel::word:
      split_on([](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; });
      break;
    case TextLevel::sentence:
      split_on([](char c) { return c == '\n'; });
      break;
    case TextLevel::paragraph: {
      std::size_t i = 0;
      std::string cur;
      while (i < text.size()) {
        if (text[i] == '\n' && i + 1 < text.size() && text[i + 1] == '\n') {
          if (!cur.empty()) out.push_back(cur);
          cur.clear();
          while (i < text.size() && text[i] == '\n') ++i;
        } else {
          cur.push_back(text[i]);
          ++i;
        }
      }
      if (!cur.empty()) out.push_back(cur);
      break;
    }
  }
  return out;
}

double RatePart::rate() const {
  if (length == 0) throw ContractError("error rate undefined for empty reference");
  return static_cast<double>(distance) / static_cast<double>(length);
}

void RatePart::merge(const RatePart& other) {
  distance += other.distance;
  length += other.length;
}

RatePart error_rate_parts(const std::vector<std::string>& preds,
                          const std::vector<std::string>& refs, TextLevel level) {
  if (preds.size() != refs.size())
    throw ContractError("prediction and reference counts differ");
  RatePart part;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    std::vector<std::string> p = tokenize_level(strip_layout_tags(preds[i]), level);
    std::vector<std::string> r = tokenize_level(strip_layout_tags(refs[i]), level);
    part.distance += levenshtein(p, r);
    part.length += static_cast<std::int64_t>(r.size());
  }
  return part;
}

double error_rate(const std::vector<std::string>& preds, const std::vector<std::string>& refs,
                  TextLevel level) {
  return error_rate_parts(preds, refs, level).rate();
}

RatePart sper_parts(const std::vector<std::string>& pred_pages,
                    const std::vector<std::string>& ref_pages, int n) {
  if (n < 1) throw ParameterError("group size must be positive");
  if (pred_pages.size() != ref_pages.size())
    throw ContractError("prediction and reference page counts differ");
  if (pred_pages.size() % static_cast<std::size_t>(n) != 0)
    throw ContractError("page count does not divide into groups of " + std::to_string(n));
  RatePart part;
  for (std::size_t g = 0; g < pred_pages.size(); g += static_cast<std::size_t>(n)) {
    std::string p, r;
    for (int k = 0; k < n; ++k) {
      if (k > 0) {
        p.push_back('\n');
        r.push_back('\n');
      }
      p += strip_layout_tags(pred_pages[g + static_cast<std::size_t>(k)]);
      r += strip_layout_tags(ref_pages[g + static_cast<std::size_t>(k)]);
    }
    part.distance += levenshtein_chars(p, r);
    part.length += static_cast<std::int64_t>(utf8_code_points(r).size());
  }
  return part;
}

double sper_n(const std::vector<std::string>& pred_pages,
              const std::vector<std::string>& ref_pages, int n) {
  return sper_parts(pred_pages, ref_pages, n).rate();
}

RatePart loer_parts(const std::vector<DocumentGraph>& preds,
                    const std::vector<DocumentGraph>& refs) {
  if (preds.size() != refs.size())
    throw ContractError("prediction and reference graph counts differ");
  RatePart part;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    part.distance += graph_edit_distance(preds[i], refs[i]).cost;
    part.length += refs[i].node_count() + refs[i].hierarchy_edge_count();
  }
  return part;
}

double loer(const std::vector<DocumentGraph>& preds, const std::vector<DocumentGraph>& refs) {
  return loer_parts(preds, refs).rate();
}

std::vector<Region> graph_regions(const DocumentGraph& g) {
  g.validate();
  std::vector<Region> out;
  auto walk = [&](auto&& self, std::int32_t id) -> void {
    const LayoutNode& n = g.nodes[static_cast<std::size_t>(id)];
    if (kind_is_leaf(n.kind)) out.push_back({n.kind, n.text});
    for (std::int32_t c : n.children) self(self, c);
  };
  walk(walk, 0);
  return out;
}

namespace {

double region_cer(const std::string& pred, const std::string& ref) {
  std::int64_t len = static_cast<std::int64_t>(utf8_code_points(ref).size());
  return static_cast<double>(levenshtein_chars(pred, ref)) /
         static_cast<double>(std::max<std::int64_t>(1, len));
}

}  // namespace

double map_cer(const std::vector<std::vector<Region>>& pred_docs,
               const std::vector<std::vector<Region>>& ref_docs) {
  if (pred_docs.size() != ref_docs.size())
    throw ContractError("prediction and reference document counts differ");
  // per class: matched pair rates and the prediction count
  std::map<NodeKind, std::vector<double>> matched;
  std::map<NodeKind, std::int64_t> pred_count;
  std::map<NodeKind, std::int64_t> ref_length;
  for (std::size_t d = 0; d < pred_docs.size(); ++d) {
    std::map<NodeKind, std::vector<const Region*>> by_class_pred, by_class_ref;
    for (const Region& r : pred_docs[d]) {
      by_class_pred[r.cls].push_back(&r);
      pred_count[r.cls] += 1;
    }
    for (const Region& r : ref_docs[d]) {
      by_class_ref[r.cls].push_back(&r);
      ref_length[r.cls] += static_cast<std::int64_t>(utf8_code_points(r.text).size());
    }
    for (auto& [cls, refs] : by_class_ref) {
      auto it = by_class_pred.find(cls);
      if (it == by_class_pred.end()) continue;
      const auto& preds = it->second;
      struct Cand {
        double cer;
        std::size_t p, r;
      };
      std::vector<Cand> cands;
      for (std::size_t p = 0; p < preds.size(); ++p)
        for (std::size_t r = 0; r < refs.size(); ++r)
          cands.push_back({region_cer(preds[p]->text, refs[r]->text), p, r});
      std::stable_sort(cands.begin(), cands.end(),
                       [](const Cand& a, const Cand& b) { return a.cer < b.cer; });
      std::vector<char> pused(preds.size(), 0), rused(refs.size(), 0);
      for (const Cand& c : cands) {
        if (pused[c.p] || rused[c.r]) continue;
        pused[c.p] = 1;
        rused[c.r] = 1;
        matched[cls].push_back(c.cer);
      }
    }
  }
  if (ref_length.empty()) throw ContractError("map_cer undefined without reference regions");
  double num = 0.0;
  double den = 0.0;
  for (const auto& [cls, len] : ref_length) {
    if (len == 0) continue;
    double ap = 0.0;
    std::int64_t total_preds = pred_count.count(cls) ? pred_count[cls] : 0;
    if (total_preds > 0) {
      const auto& rates = matched[cls];
      int taus = 0;
      for (int t = 1; t <= 10; ++t) {
        double tau = 0.05 * t;
        std::int64_t tp = static_cast<std::int64_t>(std::count_if(
            rates.begin(), rates.end(), [&](double c) { return c <= tau + 1e-12; }));
        ap += static_cast<double>(tp) / static_cast<double>(total_preds);
        ++taus;
      }
      ap /= static_cast<double>(taus);
    }
    num += ap * static_cast<double>(len);
    den += static_cast<double>(len);
  }
  if (den == 0.0) throw ContractError("map_cer undefined without reference text");
  return num / den;
}

void MetricReport::merge(const MetricReport& other) {
  cer.merge(other.cer);
  wer.merge(other.wer);
  ser.merge(other.ser);
  per.merge(other.per);
  for (const auto& [n, part] : other.sper) sper[n].merge(part);
  loer_part.merge(other.loer_part);
  std::int64_t total = map_weight + other.map_weight;
  if (total > 0) {
    map_cer_score = (map_cer_score * static_cast<double>(map_weight) +
                     other.map_cer_score * static_cast<double>(other.map_weight)) /
                    static_cast<double>(total);
  }
  map_weight = total;
  samples += other.samples;
}

std::string MetricReport::to_json() const {
  nlohmann::json j;
  auto put = [&](const char* key, const RatePart& part) {
    j[key] = {{"distance", part.distance}, {"length", part.length}};
    // a rate with no reference mass is undefined, recorded as null
    j[key]["rate"] = part.length > 0 ? nlohmann::json(part.rate()) : nlohmann::json();
  };
  put("cer", cer);
  put("wer", wer);
  put("ser", ser);
  put("per", per);
  for (const auto& [n, part] : sper) {
    std::string key = "sper_" + std::to_string(n);
    j["sper"][key] = {{"distance", part.distance}, {"length", part.length}};
    j["sper"][key]["rate"] =
        part.length > 0 ? nlohmann::json(part.rate()) : nlohmann::json();
  }
  put("loer", loer_part);
  j["map_cer"] = map_weight > 0 ? nlohmann::json(map_cer_score) : nlohmann::json();
  j["counts"] = {{"samples", samples}, {"map_weight", map_weight}};
  return j.dump(2);
}

}  // namespace scriptor
