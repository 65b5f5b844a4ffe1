#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "scriptor/errors.hpp"

namespace scriptor {

// Token inventory shared by text and layout tags. Ids 0..3 are reserved for
// <pad>, <sot>, <eot>, <unk>; everything else (characters, tags) follows.
struct Vocabulary {
  static constexpr std::int32_t pad_id = 0;
  static constexpr std::int32_t sot_id = 1;
  static constexpr std::int32_t eot_id = 2;
  static constexpr std::int32_t unk_id = 3;

  std::vector<std::string> tokens;
  std::unordered_map<std::string, std::int32_t> index;

  // entries are the non-special tokens, in order; specials are prepended
  static Vocabulary from_tokens(const std::vector<std::string>& entries);

  // one token per line with \n, \t, \s (space), \\ escapes; lines 0..3 must be
  // the four specials
  static Vocabulary load(const std::string& path);
  void save(const std::string& path) const;

  std::int32_t size() const { return static_cast<std::int32_t>(tokens.size()); }
  std::int32_t id_of(const std::string& token) const;  // unk_id when absent
  const std::string& token_of(std::int32_t id) const;

  bool is_special(std::int32_t id) const { return id >= 0 && id <= 3; }
  bool is_layout_tag(std::int32_t id) const;

  // Longest-match tokenization, so "<P>" hits the tag entry rather than three
  // characters; bytes with no matching token become one <unk> per code point.
  std::vector<std::int32_t> encode(const std::string& text) const;

  // Concatenates token strings; pad/sot/eot/unk contribute nothing.
  std::string decode(const std::vector<std::int32_t>& ids) const;
};

// Escape/unescape for the one-token-per-line file format.
std::string escape_token(const std::string& raw);
std::string unescape_token(const std::string& escaped);

}  // namespace scriptor
