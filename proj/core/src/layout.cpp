#include "scriptor/layout.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <cstring>
#include <queue>

namespace scriptor {

namespace {

constexpr const char* kLetters = "DPSNAB";

}  // namespace

char kind_letter(NodeKind kind) { return kLetters[static_cast<int>(kind)]; }

NodeKind kind_from_letter(char letter) {
  switch (letter) {
    case 'D': return NodeKind::document;
    case 'P': return NodeKind::page;
    case 'S': return NodeKind::section;
    case 'N': return NodeKind::number;
    case 'A': return NodeKind::annotation;
    case 'B': return NodeKind::body;
    default: throw ParameterError(std::string("unknown node kind letter '") + letter + "'");
  }
}

bool kind_is_leaf(NodeKind kind) {
  return kind == NodeKind::number || kind == NodeKind::annotation || kind == NodeKind::body;
}

bool kind_allows_child(NodeKind parent, NodeKind child) {
  switch (parent) {
    case NodeKind::document: return child == NodeKind::page;
    case NodeKind::page: return child == NodeKind::section || child == NodeKind::number;
    case NodeKind::section: return child == NodeKind::annotation || child == NodeKind::body;
    default: return false;  // leaves hold text, not elements
  }
}

std::int32_t DocumentGraph::add_node(std::int32_t parent, NodeKind kind, std::string text) {
  if (parent < 0) {
    if (!nodes.empty()) throw ContractError("document already has a root");
    if (kind != NodeKind::document) throw ContractError("root must be a document node");
  } else {
    if (parent >= static_cast<std::int32_t>(nodes.size()))
      throw ContractError("parent index out of range");
    if (!kind_allows_child(nodes[parent].kind, kind))
      throw ContractError(std::string("kind ") + kind_letter(kind) + " cannot attach under " +
                          kind_letter(nodes[parent].kind));
  }
  if (!text.empty() && !kind_is_leaf(kind))
    throw ContractError("text payload on a non-leaf node");
  std::int32_t id = static_cast<std::int32_t>(nodes.size());
  LayoutNode node;
  node.kind = kind;
  node.text = std::move(text);
  node.parent = parent;
  nodes.push_back(std::move(node));
  if (parent >= 0) nodes[parent].children.push_back(id);
  return id;
}

std::int64_t DocumentGraph::hierarchy_edge_count() const {
  return nodes.empty() ? 0 : static_cast<std::int64_t>(nodes.size()) - 1;
}

std::int64_t DocumentGraph::reading_order_edge_count() const {
  std::int64_t total = 0;
  for (const auto& n : nodes) {
    if (n.children.size() > 1) total += static_cast<std::int64_t>(n.children.size()) - 1;
  }
  return total;
}

void DocumentGraph::validate() const {
  if (nodes.empty()) throw ContractError("empty graph has no root");
  if (nodes[0].parent != -1 || nodes[0].kind != NodeKind::document)
    throw ContractError("node 0 must be the document root");
  std::vector<int> seen(nodes.size(), 0);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const LayoutNode& n = nodes[i];
    if (i > 0) {
      if (n.parent < 0 || n.parent >= static_cast<std::int32_t>(nodes.size()))
        throw ContractError("node without a valid parent");
      const LayoutNode& p = nodes[n.parent];
      if (!kind_allows_child(p.kind, n.kind))
        throw ContractError(std::string("kind ") + kind_letter(n.kind) +
                            " cannot attach under " + kind_letter(p.kind));
      if (std::count(p.children.begin(), p.children.end(), static_cast<std::int32_t>(i)) != 1)
        throw ContractError("parent does not list node exactly once");
    }
    for (std::int32_t c : n.children) {
      if (c <= 0 || c >= static_cast<std::int32_t>(nodes.size()))
        throw ContractError("child index out of range");
      if (nodes[c].parent != static_cast<std::int32_t>(i))
        throw ContractError("child does not point back to parent");
      if (++seen[c] > 1) throw ContractError("node claimed by two parents");
    }
    if (!n.text.empty() && !kind_is_leaf(n.kind))
      throw ContractError("text payload on a non-leaf node");
  }
}

namespace {

void collect_preorder(const DocumentGraph& g, std::int32_t id, std::vector<std::int32_t>& out) {
  out.push_back(id);
  for (std::int32_t c : g.nodes[id].children) collect_preorder(g, c, out);
}

}  // namespace

bool graph_equal(const DocumentGraph& a, const DocumentGraph& b) {
  if (a.nodes.size() != b.nodes.size()) return false;
  if (a.nodes.empty()) return true;
  std::vector<std::int32_t> pa, pb;
  collect_preorder(a, 0, pa);
  collect_preorder(b, 0, pb);
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const LayoutNode& na = a.nodes[pa[i]];
    const LayoutNode& nb = b.nodes[pb[i]];
    if (na.kind != nb.kind || na.text != nb.text) return false;
    if (na.children.size() != nb.children.size()) return false;
  }
  return true;
}

namespace {

// A tag is exactly "<X>" or "</X>" with X in DPSNAB; anything else is text.
struct TagScan {
  bool is_tag = false;
  bool closing = false;
  NodeKind kind = NodeKind::document;
  std::size_t length = 0;
};

TagScan scan_tag(const std::string& s, std::size_t i) {
  TagScan t;
  if (i >= s.size() || s[i] != '<') return t;
  std::size_t j = i + 1;
  bool closing = false;
  if (j < s.size() && s[j] == '/') {
    closing = true;
    ++j;
  }
  if (j + 1 < s.size() && std::strchr(kLetters, s[j]) != nullptr && s[j] != '\0' &&
      s[j + 1] == '>') {
    t.is_tag = true;
    t.closing = closing;
    t.kind = kind_from_letter(s[j]);
    t.length = j + 2 - i;
  }
  return t;
}

}  // namespace

DocumentGraph tokens_to_graph(const std::string& tokens) {
  DocumentGraph g;
  std::vector<std::int32_t> stack;  // open node ids
  std::vector<std::size_t> open_at;
  bool root_closed = false;
  std::size_t i = 0;
  while (i < tokens.size()) {
    TagScan t = scan_tag(tokens, i);
    if (t.is_tag) {
      if (root_closed)
        throw ParseError("content after the document closed", i);
      if (!t.closing) {
        if (stack.empty()) {
          if (!g.nodes.empty())
            throw ParseError("second root element", i);
          if (t.kind != NodeKind::document)
            throw ParseError(std::string("expected <D> at the start, got <") +
                                 kind_letter(t.kind) + ">",
                             i);
          g.add_node(-1, NodeKind::document);
          stack.push_back(0);
          open_at.push_back(i);
        } else {
          NodeKind top = g.nodes[stack.back()].kind;
          if (!kind_allows_child(top, t.kind))
            throw ParseError(std::string("<") + kind_letter(t.kind) +
                                 "> cannot open inside <" + kind_letter(top) + ">",
                             i);
          std::int32_t id = g.add_node(stack.back(), t.kind);
          stack.push_back(id);
          open_at.push_back(i);
        }
      } else {
        if (stack.empty())
          throw ParseError(std::string("unmatched </") + kind_letter(t.kind) + ">", i);
        NodeKind top = g.nodes[stack.back()].kind;
        if (top != t.kind)
          throw ParseError(std::string("</") + kind_letter(t.kind) + "> closes <" +
                               kind_letter(top) + "> opened at position " +
                               std::to_string(open_at.back()),
                           i);
        stack.pop_back();
        open_at.pop_back();
        if (stack.empty()) root_closed = true;
      }
      i += t.length;
    } else {
      if (root_closed)
        throw ParseError("content after the document closed", i);
      if (stack.empty() || !kind_is_leaf(g.nodes[stack.back()].kind))
        throw ParseError("text outside a leaf element", i);
      g.nodes[stack.back()].text.push_back(tokens[i]);
      ++i;
    }
  }
  if (!stack.empty())
    throw ParseError(std::string("unclosed <") + kind_letter(g.nodes[stack.back()].kind) +
                         "> opened at position " + std::to_string(open_at.back()),
                     tokens.size());
  if (g.nodes.empty()) throw ParseError("empty input, no document element", 0);
  return g;
}

LenientParse tokens_to_graph_lenient(const std::string& tokens) {
  LenientParse out;
  DocumentGraph& g = out.graph;
  std::vector<std::int32_t> stack;
  auto repair = [&](std::size_t pos, std::string msg) {
    out.repairs.push_back({pos, std::move(msg)});
  };
  auto ensure_root = [&](std::size_t pos) {
    if (g.nodes.empty()) {
      g.add_node(-1, NodeKind::document);
      stack.push_back(0);
      repair(pos, "inserted missing <D>");
    }
  };
  std::size_t i = 0;
  while (i < tokens.size()) {
    TagScan t = scan_tag(tokens, i);
    if (t.is_tag) {
      if (!t.closing) {
        if (t.kind == NodeKind::document) {
          if (g.nodes.empty()) {
            g.add_node(-1, NodeKind::document);
            stack.push_back(0);
          } else {
            repair(i, "dropped extra <D>");
          }
        } else {
          ensure_root(i);
          if (stack.empty()) {
            repair(i, std::string("dropped <") + kind_letter(t.kind) +
                          "> after the document closed");
          } else {
            // close elements until the tag can attach, or give up on it
            std::size_t depth = stack.size();
            while (depth > 0 && !kind_allows_child(g.nodes[stack[depth - 1]].kind, t.kind))
              --depth;
            if (depth == 0) {
              repair(i, std::string("dropped misplaced <") + kind_letter(t.kind) + ">");
            } else {
              while (stack.size() > depth) {
                repair(i, std::string("auto-closed <") +
                              kind_letter(g.nodes[stack.back()].kind) + ">");
                stack.pop_back();
              }
              stack.push_back(g.add_node(stack.back(), t.kind));
            }
          }
        }
      } else {
        auto it = std::find_if(stack.rbegin(), stack.rend(), [&](std::int32_t id) {
          return g.nodes[id].kind == t.kind;
        });
        if (it == stack.rend()) {
          repair(i, std::string("dropped unmatched </") + kind_letter(t.kind) + ">");
        } else {
          while (g.nodes[stack.back()].kind != t.kind) {
            repair(i, std::string("auto-closed <") + kind_letter(g.nodes[stack.back()].kind) +
                          ">");
            stack.pop_back();
          }
          stack.pop_back();
        }
      }
      i += t.length;
    } else {
      std::size_t start = i;
      while (i < tokens.size() && !scan_tag(tokens, i).is_tag) ++i;
      std::string run = tokens.substr(start, i - start);
      if (!stack.empty() && kind_is_leaf(g.nodes[stack.back()].kind)) {
        g.nodes[stack.back()].text += run;
      } else if (run.find_first_not_of(" \t\r\n") != std::string::npos) {
        repair(start, "dropped text outside a leaf element");
      }
    }
  }
  if (g.nodes.empty()) ensure_root(tokens.size());
  while (!stack.empty()) {
    repair(tokens.size(),
           std::string("auto-closed <") + kind_letter(g.nodes[stack.back()].kind) + ">");
    stack.pop_back();
  }
  return out;
}

namespace {

void write_tokens(const DocumentGraph& g, std::int32_t id, std::string& out) {
  const LayoutNode& n = g.nodes[id];
  char letter = kind_letter(n.kind);
  out.push_back('<');
  out.push_back(letter);
  out.push_back('>');
  out += n.text;
  for (std::int32_t c : n.children) write_tokens(g, c, out);
  out.push_back('<');
  out.push_back('/');
  out.push_back(letter);
  out.push_back('>');
}

}  // namespace

std::string graph_to_tokens(const DocumentGraph& g) {
  g.validate();
  std::string out;
  write_tokens(g, 0, out);
  return out;
}

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out.push_back(c);
  }
  return out;
}

// children in canonical order: within a page numbers precede sections, within a
// section annotations precede bodies; reading order within each kind group
std::vector<std::int32_t> canonical_children(const DocumentGraph& g, std::int32_t id) {
  std::vector<std::int32_t> out;
  const auto& kids = g.nodes[id].children;
  NodeKind kind = g.nodes[id].kind;
  auto take = [&](NodeKind want) {
    for (std::int32_t c : kids)
      if (g.nodes[c].kind == want) out.push_back(c);
  };
  if (kind == NodeKind::page) {
    take(NodeKind::number);
    take(NodeKind::section);
  } else if (kind == NodeKind::section) {
    take(NodeKind::annotation);
    take(NodeKind::body);
  } else {
    out = kids;
  }
  return out;
}

void write_xml(const DocumentGraph& g, std::int32_t id, int depth, std::string& out) {
  const LayoutNode& n = g.nodes[id];
  std::string indent(2 * static_cast<std::size_t>(depth), ' ');
  char letter = kind_letter(n.kind);
  if (n.children.empty() && n.text.empty()) {
    out += indent + "<" + letter + "/>\n";
    return;
  }
  if (kind_is_leaf(n.kind)) {
    out += indent + "<" + letter + ">" + xml_escape(n.text) + "</" + letter + ">\n";
    return;
  }
  out += indent + "<" + letter + ">\n";
  for (std::int32_t c : canonical_children(g, id)) write_xml(g, c, depth + 1, out);
  out += indent + "</" + letter + ">\n";
}

}  // namespace

std::string graph_to_xml(const DocumentGraph& g) {
  g.validate();
  std::string out;
  write_xml(g, 0, 0, out);
  return out;
}

namespace {

struct XmlParser {
  const std::string& s;
  std::size_t i = 0;

  explicit XmlParser(const std::string& text) : s(text) {}

  void skip_ws() {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r' || s[i] == '\n')) ++i;
  }

  std::string read_text_until_close() {
    std::string out;
    while (i < s.size() && s[i] != '<') {
      if (s[i] == '&') {
        if (s.compare(i, 5, "&amp;") == 0) { out.push_back('&'); i += 5; }
        else if (s.compare(i, 4, "&lt;") == 0) { out.push_back('<'); i += 4; }
        else if (s.compare(i, 4, "&gt;") == 0) { out.push_back('>'); i += 4; }
        else throw ParseError("unknown entity", i);
      } else {
        out.push_back(s[i]);
        ++i;
      }
    }
    return out;
  }

  // parses one element, attaching under parent
  void element(DocumentGraph& g, std::int32_t parent) {
    if (i >= s.size() || s[i] != '<') throw ParseError("expected an element", i);
    std::size_t at = i;
    ++i;
    if (i >= s.size()) throw ParseError("truncated tag", at);
    NodeKind kind;
    try {
      kind = kind_from_letter(s[i]);
    } catch (const ParameterError&) {
      throw ParseError(std::string("unknown element '") + s[i] + "'", i);
    }
    ++i;
    bool self_closed = false;
    if (i < s.size() && s[i] == '/') {
      self_closed = true;
      ++i;
    }
    if (i >= s.size() || s[i] != '>') throw ParseError("malformed tag", at);
    ++i;
    std::int32_t id;
    try {
      id = g.add_node(parent, kind);
    } catch (const ContractError& e) {
      throw ParseError(e.what(), at);
    }
    if (self_closed) return;
    if (kind_is_leaf(kind)) {
      g.nodes[id].text = read_text_until_close();
    } else {
      skip_ws();
      while (i < s.size() && s[i] == '<' && i + 1 < s.size() && s[i + 1] != '/') {
        element(g, id);
        skip_ws();
      }
    }
    std::size_t close_at = i;
    if (i >= s.size() || s.compare(i, 2, "</") != 0)
      throw ParseError(std::string("expected </") + kind_letter(kind) + ">", close_at);
    i += 2;
    if (i >= s.size() || s[i] != kind_letter(kind))
      throw ParseError(std::string("mismatched close for <") + kind_letter(kind) + ">",
                       close_at);
    ++i;
    if (i >= s.size() || s[i] != '>') throw ParseError("malformed close tag", close_at);
    ++i;
  }
};

}  // namespace

DocumentGraph xml_to_graph(const std::string& xml) {
  DocumentGraph g;
  XmlParser p(xml);
  p.skip_ws();
  p.element(g, -1);
  p.skip_ws();
  if (p.i != xml.size()) throw ParseError("trailing content after the document", p.i);
  g.validate();
  return g;
}

namespace {

// dense typed adjacency for edit distance work
struct EdgeTables {
  std::int64_t n = 0;
  std::vector<std::uint8_t> hier;  // n*n, parent->child
  std::vector<std::uint8_t> order;  // n*n, sibling->next sibling

  explicit EdgeTables(const DocumentGraph& g) : n(g.node_count()) {
    hier.assign(static_cast<std::size_t>(n * n), 0);
    order.assign(static_cast<std::size_t>(n * n), 0);
    for (std::int64_t p = 0; p < n; ++p) {
      const auto& kids = g.nodes[static_cast<std::size_t>(p)].children;
      for (std::size_t k = 0; k < kids.size(); ++k) {
        hier[static_cast<std::size_t>(p * n + kids[k])] = 1;
        if (k + 1 < kids.size())
          order[static_cast<std::size_t>(kids[k] * n + kids[k + 1])] = 1;
      }
    }
  }

  bool h(std::int64_t u, std::int64_t v) const { return hier[static_cast<std::size_t>(u * n + v)] != 0; }
  bool r(std::int64_t u, std::int64_t v) const { return order[static_cast<std::size_t>(u * n + v)] != 0; }
};

std::vector<std::int32_t> bfs_order(const DocumentGraph& g) {
  std::vector<std::int32_t> out;
  if (g.nodes.empty()) return out;
  std::queue<std::int32_t> q;
  q.push(0);
  while (!q.empty()) {
    std::int32_t id = q.front();
    q.pop();
    out.push_back(id);
    for (std::int32_t c : g.nodes[id].children) q.push(c);
  }
  return out;
}

// full cost of a node mapping (map[u] = image in b, or -1 for deletion)
std::int64_t mapping_cost(const DocumentGraph& a, const DocumentGraph& b, const EdgeTables& ea,
                          const EdgeTables& eb, const std::vector<std::int32_t>& map) {
  std::int64_t cost = 0;
  std::vector<std::int32_t> pre(static_cast<std::size_t>(eb.n), -1);
  for (std::int64_t u = 0; u < ea.n; ++u) {
    std::int32_t m = map[static_cast<std::size_t>(u)];
    if (m < 0) {
      cost += 1;
    } else {
      pre[static_cast<std::size_t>(m)] = static_cast<std::int32_t>(u);
      if (a.nodes[static_cast<std::size_t>(u)].kind != b.nodes[static_cast<std::size_t>(m)].kind)
        cost += 1;
    }
  }
  for (std::int64_t v = 0; v < eb.n; ++v)
    if (pre[static_cast<std::size_t>(v)] < 0) cost += 1;
  for (std::int64_t u = 0; u < ea.n; ++u) {
    for (std::int64_t v = 0; v < ea.n; ++v) {
      std::int32_t mu = map[static_cast<std::size_t>(u)];
      std::int32_t mv = map[static_cast<std::size_t>(v)];
      bool mapped = mu >= 0 && mv >= 0;
      if (ea.h(u, v) && !(mapped && eb.h(mu, mv))) cost += 1;
      if (ea.r(u, v) && !(mapped && eb.r(mu, mv))) cost += 1;
    }
  }
  for (std::int64_t u = 0; u < eb.n; ++u) {
    for (std::int64_t v = 0; v < eb.n; ++v) {
      std::int32_t pu = pre[static_cast<std::size_t>(u)];
      std::int32_t pv = pre[static_cast<std::size_t>(v)];
      bool mapped = pu >= 0 && pv >= 0;
      if (eb.h(u, v) && !(mapped && ea.h(pu, pv))) cost += 1;
      if (eb.r(u, v) && !(mapped && ea.r(pu, pv))) cost += 1;
    }
  }
  return cost;
}

// greedy upper bound: match nodes by kind in breadth-first order
std::vector<std::int32_t> greedy_mapping(const DocumentGraph& a, const DocumentGraph& b) {
  std::vector<std::int32_t> oa = bfs_order(a);
  std::vector<std::int32_t> ob = bfs_order(b);
  std::vector<std::int64_t> pos_b(b.nodes.size(), 0);
  for (std::size_t k = 0; k < ob.size(); ++k) pos_b[static_cast<std::size_t>(ob[k])] = static_cast<std::int64_t>(k);
  std::vector<std::uint8_t> used(b.nodes.size(), 0);
  std::vector<std::int32_t> map(a.nodes.size(), -1);
  for (std::size_t k = 0; k < oa.size(); ++k) {
    std::int32_t u = oa[k];
    std::int64_t best = -1;
    std::int64_t best_gap = 0;
    for (std::size_t j = 0; j < b.nodes.size(); ++j) {
      if (used[j] || b.nodes[j].kind != a.nodes[static_cast<std::size_t>(u)].kind) continue;
      std::int64_t gap = std::abs(pos_b[j] - static_cast<std::int64_t>(k));
      if (best < 0 || gap < best_gap) {
        best = static_cast<std::int64_t>(j);
        best_gap = gap;
      }
    }
    if (best >= 0) {
      map[static_cast<std::size_t>(u)] = static_cast<std::int32_t>(best);
      used[static_cast<std::size_t>(best)] = 1;
    }
  }
  return map;
}

struct SearchState {
  std::int64_t priority = 0;  // g + h, exact total once complete
  std::int64_t g = 0;
  bool complete = false;
  std::vector<std::int32_t> map;   // per bfs position of graph a, image node id or -1
  std::vector<std::uint8_t> used;  // graph b node ids already taken

  bool operator>(const SearchState& o) const { return priority > o.priority; }
};

}  // namespace

GedResult graph_edit_distance(const DocumentGraph& a, const DocumentGraph& b) {
  a.validate();
  b.validate();
  EdgeTables ea(a), eb(b);
  const std::int64_t n1 = ea.n;
  const std::int64_t n2 = eb.n;

  auto greedy = [&]() {
    std::vector<std::int32_t> map = greedy_mapping(a, b);
    return mapping_cost(a, b, ea, eb, map);
  };

  if (n1 > 10 || n2 > 10) return {greedy(), false};

  std::vector<std::int32_t> order = bfs_order(a);

  // remaining-kind counts for the admissible lower bound
  auto kind_counts = [](const DocumentGraph& g, const std::vector<std::int32_t>& ids,
                        std::size_t from) {
    std::array<std::int64_t, 6> c{};
    for (std::size_t k = from; k < ids.size(); ++k)
      c[static_cast<std::size_t>(g.nodes[static_cast<std::size_t>(ids[k])].kind)] += 1;
    return c;
  };

  auto lower_bound = [&](std::size_t next, const std::vector<std::uint8_t>& used) {
    std::array<std::int64_t, 6> ca = kind_counts(a, order, next);
    std::array<std::int64_t, 6> cb{};
    std::int64_t r2 = 0;
    for (std::int64_t v = 0; v < n2; ++v) {
      if (!used[static_cast<std::size_t>(v)]) {
        cb[static_cast<std::size_t>(b.nodes[static_cast<std::size_t>(v)].kind)] += 1;
        ++r2;
      }
    }
    std::int64_t r1 = static_cast<std::int64_t>(order.size() - next);
    std::int64_t overlap = 0;
    for (std::size_t k = 0; k < 6; ++k) overlap += std::min(ca[k], cb[k]);
    return std::max(r1, r2) - overlap;
  };

  // incremental cost of fixing node u's image given all earlier assignments
  auto step_cost = [&](const std::vector<std::int32_t>& map, std::size_t next,
                       std::int32_t image) {
    std::int64_t add = 0;
    std::int32_t u = order[next];
    if (image < 0) {
      add += 1;
    } else if (a.nodes[static_cast<std::size_t>(u)].kind !=
               b.nodes[static_cast<std::size_t>(image)].kind) {
      add += 1;
    }
    for (std::size_t k = 0; k < next; ++k) {
      std::int32_t w = order[k];
      std::int32_t mw = map[k];
      bool mapped = image >= 0 && mw >= 0;
      if (ea.h(u, w) && !(mapped && eb.h(image, mw))) add += 1;
      if (ea.h(w, u) && !(mapped && eb.h(mw, image))) add += 1;
      if (ea.r(u, w) && !(mapped && eb.r(image, mw))) add += 1;
      if (ea.r(w, u) && !(mapped && eb.r(mw, image))) add += 1;
      if (mapped) {
        if (eb.h(image, mw) && !ea.h(u, w)) add += 1;
        if (eb.h(mw, image) && !ea.h(w, u)) add += 1;
        if (eb.r(image, mw) && !ea.r(u, w)) add += 1;
        if (eb.r(mw, image) && !ea.r(w, u)) add += 1;
      }
    }
    return add;
  };

  auto final_cost = [&](const SearchState& st) {
    std::int64_t add = 0;
    for (std::int64_t v = 0; v < n2; ++v) {
      if (st.used[static_cast<std::size_t>(v)]) continue;
      add += 1;  // inserted node
      for (std::int64_t w = 0; w < n2; ++w) {
        if (eb.h(v, w)) add += 1;
        if (eb.h(w, v) && st.used[static_cast<std::size_t>(w)]) add += 1;
        if (eb.r(v, w)) add += 1;
        if (eb.r(w, v) && st.used[static_cast<std::size_t>(w)]) add += 1;
      }
    }
    return add;
  };

  std::priority_queue<SearchState, std::vector<SearchState>, std::greater<SearchState>> open;
  SearchState start;
  start.used.assign(static_cast<std::size_t>(n2), 0);
  start.priority = lower_bound(0, start.used);
  open.push(start);
  std::int64_t pops = 0;
  const std::int64_t pop_cap = 2000000;
  while (!open.empty()) {
    SearchState st = open.top();
    open.pop();
    if (++pops > pop_cap) break;
    if (st.complete) return {st.priority, true};
    std::size_t next = st.map.size();
    if (next == order.size()) {
      // cost of inserting every untouched target node and its edges is only
      // known here, so requeue with the exact total instead of returning early
      st.complete = true;
      st.priority = st.g + final_cost(st);
      open.push(std::move(st));
      continue;
    }
    for (std::int32_t image = -1; image < static_cast<std::int32_t>(n2); ++image) {
      if (image >= 0 && st.used[static_cast<std::size_t>(image)]) continue;
      SearchState ns = st;
      ns.map.push_back(image);
      if (image >= 0) ns.used[static_cast<std::size_t>(image)] = 1;
      ns.g += step_cost(st.map, next, image);
      ns.priority = ns.g + lower_bound(next + 1, ns.used);
      open.push(std::move(ns));
    }
  }
  return {greedy(), false};  // search budget exhausted, fall back to the bound
}

TextCorrector identity_corrector() {
  return [](const std::string& text) { return text; };
}

PostprocessResult postprocess_tokens(const std::string& raw, const TextCorrector& corrector) {
  PostprocessResult out;
  std::size_t i = 0;
  while (i < raw.size()) {
    TagScan t = scan_tag(raw, i);
    if (t.is_tag) {
      out.tokens.append(raw, i, t.length);
      i += t.length;
      continue;
    }
    std::size_t start = i;
    while (i < raw.size() && !scan_tag(raw, i).is_tag) ++i;
    std::string corrected = corrector(raw.substr(start, i - start));
    // the corrector owns the text but never the structure; strip any tags it emits
    std::string cleaned;
    std::size_t j = 0;
    bool stripped = false;
    while (j < corrected.size()) {
      TagScan ct = scan_tag(corrected, j);
      if (ct.is_tag) {
        stripped = true;
        j += ct.length;
      } else {
        cleaned.push_back(corrected[j]);
        ++j;
      }
    }
    if (stripped)
      out.warnings.push_back("corrector emitted layout tags at position " +
                             std::to_string(start) + "; stripped");
    out.tokens += cleaned;
  }
  return out;
}

DocumentGraph random_document_graph(RngStream& rng, std::int64_t max_nodes) {
  if (max_nodes < 1) throw ParameterError("max_nodes must be at least 1");
  DocumentGraph g;
  g.add_node(-1, NodeKind::document);
  std::int64_t budget = rng.uniform_int(1, max_nodes);
  auto word = [&]() {
    std::string s;
    std::int64_t len = rng.uniform_int(1, 5);
    for (std::int64_t k = 0; k < len; ++k)
      s.push_back(static_cast<char>('a' + rng.uniform_int(0, 25)));
    return s;
  };
  auto digits = [&]() {
    std::string s;
    std::int64_t len = rng.uniform_int(1, 3);
    for (std::int64_t k = 0; k < len; ++k)
      s.push_back(static_cast<char>('0' + rng.uniform_int(0, 9)));
    return s;
  };
  std::int64_t pages = rng.uniform_int(0, 3);
  for (std::int64_t p = 0; p < pages && g.node_count() < budget; ++p) {
    std::int32_t page = g.add_node(0, NodeKind::page);
    if (g.node_count() < budget && rng.bernoulli(0.5))
      g.add_node(page, NodeKind::number, digits());
    std::int64_t sections = rng.uniform_int(0, 2);
    for (std::int64_t s = 0; s < sections && g.node_count() < budget; ++s) {
      std::int32_t section = g.add_node(page, NodeKind::section);
      if (g.node_count() < budget && rng.bernoulli(0.4))
        g.add_node(section, NodeKind::annotation, word());
      std::int64_t bodies = rng.uniform_int(0, 2);
      for (std::int64_t bdy = 0; bdy < bodies && g.node_count() < budget; ++bdy)
        g.add_node(section, NodeKind::body, word() + " " + word());
    }
  }
  return g;
}

}  // namespace scriptor
