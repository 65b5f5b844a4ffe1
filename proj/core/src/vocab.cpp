#include "scriptor/vocab.hpp"

#include <fstream>
#include <sstream>

namespace scriptor {

namespace {

const std::vector<std::string>& specials() {
  static const std::vector<std::string> s = {"<pad>", "<sot>", "<eot>", "<unk>"};
  return s;
}

// utf-8 length of the sequence starting at text[i], for unk advancement
std::size_t code_point_span(const std::string& text, std::size_t i) {
  unsigned char c = static_cast<unsigned char>(text[i]);
  if (c < 0x80) return 1;
  if ((c & 0xE0) == 0xC0) return 2;
  if ((c & 0xF0) == 0xE0) return 3;
  if ((c & 0xF8) == 0xF0) return 4;
  return 1;  // malformed byte, step over it
}

}  // namespace

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& entries) {
  Vocabulary v;
  for (const std::string& s : specials()) {
    v.index[s] = static_cast<std::int32_t>(v.tokens.size());
    v.tokens.push_back(s);
  }
  for (const std::string& t : entries) {
    if (t.empty()) throw ParameterError("empty vocabulary token");
    if (v.index.count(t)) throw ParameterError("duplicate vocabulary token: " + t);
    v.index[t] = static_cast<std::int32_t>(v.tokens.size());
    v.tokens.push_back(t);
  }
  return v;
}

std::string escape_token(const std::string& raw) {
  std::string out;
  for (char c : raw) {
    switch (c) {
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case ' ': out += "\\s"; break;
      case '\\': out += "\\\\"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string unescape_token(const std::string& escaped) {
  std::string out;
  std::size_t i = 0;
  while (i < escaped.size()) {
    if (escaped[i] == '\\') {
      if (i + 1 >= escaped.size()) throw ParseError("dangling escape in vocabulary entry", i);
      switch (escaped[i + 1]) {
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        case 's': out.push_back(' '); break;
        case '\\': out.push_back('\\'); break;
        default: throw ParseError("unknown escape in vocabulary entry", i);
      }
      i += 2;
    } else {
      out.push_back(escaped[i]);
      ++i;
    }
  }
  return out;
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open vocabulary file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  if (lines.size() < 4) throw ParseError("vocabulary file needs the four special tokens first");
  for (std::size_t i = 0; i < 4; ++i) {
    if (lines[i] != specials()[i])
      throw ParseError("vocabulary line " + std::to_string(i) + " must be " + specials()[i]);
  }
  std::vector<std::string> entries;
  for (std::size_t i = 4; i < lines.size(); ++i) entries.push_back(unescape_token(lines[i]));
  return from_tokens(entries);
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vocabulary file: " + path);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i < 4) out << tokens[i] << '\n';
    else out << escape_token(tokens[i]) << '\n';
  }
  if (!out) throw IoError("vocabulary write failed: " + path);
}

std::int32_t Vocabulary::id_of(const std::string& token) const {
  auto it = index.find(token);
  return it == index.end() ? unk_id : it->second;
}

const std::string& Vocabulary::token_of(std::int32_t id) const {
  if (id < 0 || id >= size()) throw ParameterError("token id out of range");
  return tokens[static_cast<std::size_t>(id)];
}

bool Vocabulary::is_layout_tag(std::int32_t id) const {
  if (id < 0 || id >= size()) return false;
  const std::string& t = tokens[static_cast<std::size_t>(id)];
  if (t.size() < 3 || t.front() != '<' || t.back() != '>') return false;
  std::size_t k = (t[1] == '/') ? 2 : 1;
  return t.size() == k + 2 && std::string("DPSNAB").find(t[k]) != std::string::npos;
}

std::vector<std::int32_t> Vocabulary::encode(const std::string& text) const {
  std::vector<std::int32_t> out;
  std::size_t i = 0;
  while (i < text.size()) {
    std::int32_t best_id = -1;
    std::size_t best_len = 0;
    for (std::size_t id = 4; id < tokens.size(); ++id) {
      const std::string& t = tokens[id];
      if (t.size() > best_len && text.compare(i, t.size(), t) == 0) {
        best_id = static_cast<std::int32_t>(id);
        best_len = t.size();
      }
    }
    if (best_id >= 0) {
      out.push_back(best_id);
      i += best_len;
    } else {
      out.push_back(unk_id);
      i += code_point_span(text, i);
    }
  }
  return out;
}

std::string Vocabulary::decode(const std::vector<std::int32_t>& ids) const {
  std::string out;
  for (std::int32_t id : ids) {
    if (id < 0 || id >= size()) throw ParameterError("token id out of range");
    if (is_special(id)) continue;
    out += tokens[static_cast<std::size_t>(id)];
  }
  return out;
}

}  // namespace scriptor
