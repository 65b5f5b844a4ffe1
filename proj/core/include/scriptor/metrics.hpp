#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "scriptor/errors.hpp"
#include "scriptor/layout.hpp"

namespace scriptor {

// Decodes UTF-8 into code points; throws ParseError on malformed bytes.
std::vector<char32_t> utf8_code_points(const std::string& text);

// Classic dynamic-program edit distance with unit insert/delete/substitute.
template <typename T>
std::int64_t levenshtein(const std::vector<T>& a, const std::vector<T>& b) {
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  std::vector<std::int64_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = static_cast<std::int64_t>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<std::int64_t>(i);
    for (std::size_t j = 1; j <= m; ++j) {
      std::int64_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

// Edit distance between two strings at code-point granularity.
std::int64_t levenshtein_chars(const std::string& a, const std::string& b);

// Removes every layout tag ("<P>", "</B>", ...) from the text.
std::string strip_layout_tags(const std::string& text);

enum class TextLevel { character, word, sentence, paragraph };

// Tokenizes stripped text for one level: code points; whitespace-split words;
// line-split sentences; blank-line-split paragraphs.
std::vector<std::string> tokenize_level(const std::string& text, TextLevel level);

// Micro-average parts: a rate is summed distance over summed reference length,
// never a mean of per-sample rates.
struct RatePart {
  std::int64_t distance = 0;
  std::int64_t length = 0;
  double rate() const;  // ContractError when length is 0
  void merge(const RatePart& other);
};

RatePart error_rate_parts(const std::vector<std::string>& preds,
                          const std::vector<std::string>& refs, TextLevel level);
double error_rate(const std::vector<std::string>& preds, const std::vector<std::string>& refs,
                  TextLevel level);

// Character error rate over groups of n consecutive pages (pages joined with a
// newline). Page counts must match and divide evenly into groups.
RatePart sper_parts(const std::vector<std::string>& pred_pages,
                    const std::vector<std::string>& ref_pages, int n);
double sper_n(const std::vector<std::string>& pred_pages,
              const std::vector<std::string>& ref_pages, int n);

// Graph edit distance totals over reference graph size (nodes plus hierarchy
// edges), one pair per document.
RatePart loer_parts(const std::vector<DocumentGraph>& preds,
                    const std::vector<DocumentGraph>& refs);
double loer(const std::vector<DocumentGraph>& preds, const std::vector<DocumentGraph>& refs);

// A text region labeled with its layout class, the unit scored by map_cer.
struct Region {
  NodeKind cls = NodeKind::body;
  std::string text;
};

// Leaf nodes of a graph in reading order, as regions.
std::vector<Region> graph_regions(const DocumentGraph& g);

// Mean average precision under character-error thresholds 0.05..0.50 (step
// 0.05). Predictions are matched to references of the same class within each
// document greedily by ascending character error rate; a matched pair counts as
// a true positive at threshold tau when its rate is at most tau. Class scores
// are averaged weighted by total reference character length.
double map_cer(const std::vector<std::vector<Region>>& pred_docs,
               const std::vector<std::vector<Region>>& ref_docs);

// Corpus-level bundle. Additive parts merge across shards; map_cer_score is
// recomputed from full region sets by the evaluator, and merge combines it as a
// reference-length weighted mean.
struct MetricReport {
  RatePart cer, wer, ser, per;
  std::map<int, RatePart> sper;  // group size -> parts
  RatePart loer_part;
  double map_cer_score = 0.0;
  std::int64_t map_weight = 0;  // total reference characters behind map_cer_score
  std::int64_t samples = 0;

  void merge(const MetricReport& other);
  std::string to_json() const;
};

}  // namespace scriptor
