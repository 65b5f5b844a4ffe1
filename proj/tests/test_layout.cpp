#include <algorithm>
#include <cctype>
#include <string>
#include <vector>

#include "doctest.h"
#include "scriptor/layout.hpp"
#include "scriptor/rng.hpp"

using namespace scriptor;

namespace {

// independent exhaustive edit-distance oracle for tiny graphs: enumerate every
// partial injective node mapping and cost it from scratch
struct TinyEdges {
  std::vector<std::pair<int, int>> hier;
  std::vector<std::pair<int, int>> order;
};

TinyEdges edges_of(const DocumentGraph& g) {
  TinyEdges e;
  for (std::size_t p = 0; p < g.nodes.size(); ++p) {
    const auto& kids = g.nodes[p].children;
    for (std::size_t k = 0; k < kids.size(); ++k) {
      e.hier.push_back({static_cast<int>(p), kids[k]});
      if (k + 1 < kids.size()) e.order.push_back({kids[k], kids[k + 1]});
    }
  }
  return e;
}

bool has_edge(const std::vector<std::pair<int, int>>& edges, int u, int v) {
  return std::find(edges.begin(), edges.end(), std::make_pair(u, v)) != edges.end();
}

long cost_of_mapping(const DocumentGraph& a, const DocumentGraph& b,
                     const std::vector<int>& map) {
  TinyEdges ea = edges_of(a), eb = edges_of(b);
  long cost = 0;
  std::vector<int> pre(b.nodes.size(), -1);
  for (std::size_t u = 0; u < a.nodes.size(); ++u) {
    if (map[u] < 0) {
      cost += 1;
    } else {
      pre[map[u]] = static_cast<int>(u);
      if (a.nodes[u].kind != b.nodes[map[u]].kind) cost += 1;
    }
  }
  for (std::size_t v = 0; v < b.nodes.size(); ++v)
    if (pre[v] < 0) cost += 1;
  auto edge_side = [&](const std::vector<std::pair<int, int>>& mine,
                       const std::vector<std::pair<int, int>>& theirs,
                       const std::vector<int>& image) {
    long c = 0;
    for (auto [u, v] : mine) {
      if (image[u] < 0 || image[v] < 0 || !has_edge(theirs, image[u], image[v])) c += 1;
    }
    return c;
  };
  std::vector<int> pre_int(pre.begin(), pre.end());
  cost += edge_side(ea.hier, eb.hier, map);
  cost += edge_side(ea.order, eb.order, map);
  cost += edge_side(eb.hier, ea.hier, pre_int);
  cost += edge_side(eb.order, ea.order, pre_int);
  return cost;
}

long brute_force_ged(const DocumentGraph& a, const DocumentGraph& b) {
  std::size_t n1 = a.nodes.size();
  std::size_t n2 = b.nodes.size();
  std::vector<int> map(n1, -1);
  std::vector<char> used(n2, 0);
  long best = -1;
  auto rec = [&](auto&& self, std::size_t i) -> void {
    if (i == n1) {
      long c = cost_of_mapping(a, b, map);
      if (best < 0 || c < best) best = c;
      return;
    }
    map[i] = -1;
    self(self, i + 1);
    for (std::size_t v = 0; v < n2; ++v) {
      if (used[v]) continue;
      used[v] = 1;
      map[i] = static_cast<int>(v);
      self(self, i + 1);
      used[v] = 0;
      map[i] = -1;
    }
  };
  rec(rec, 0);
  return best;
}

DocumentGraph five_node_example() {
  DocumentGraph g;
  g.add_node(-1, NodeKind::document);
  std::int32_t p = g.add_node(0, NodeKind::page);
  g.add_node(p, NodeKind::number, "1");
  std::int32_t s = g.add_node(p, NodeKind::section);
  g.add_node(s, NodeKind::body, "abc");
  return g;
}

std::vector<std::string> tag_sequence(const std::string& s) {
  std::vector<std::string> tags;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '<') continue;
    std::size_t j = i + 1;
    if (j < s.size() && s[j] == '/') ++j;
    if (j + 1 < s.size() && std::string("DPSNAB").find(s[j]) != std::string::npos &&
        s[j + 1] == '>') {
      tags.push_back(s.substr(i, j + 2 - i));
      i = j + 1;
    }
  }
  return tags;
}

}  // namespace

TEST_CASE("kind letters and child rules") {
  const NodeKind kinds[] = {NodeKind::document, NodeKind::page,       NodeKind::section,
                            NodeKind::number,   NodeKind::annotation, NodeKind::body};
  const char letters[] = {'D', 'P', 'S', 'N', 'A', 'B'};
  for (int i = 0; i < 6; ++i) {
    CHECK(kind_letter(kinds[i]) == letters[i]);
    CHECK(kind_from_letter(letters[i]) == kinds[i]);
  }
  CHECK_THROWS_AS(kind_from_letter('X'), ParameterError);

  CHECK(!kind_is_leaf(NodeKind::document));
  CHECK(!kind_is_leaf(NodeKind::page));
  CHECK(!kind_is_leaf(NodeKind::section));
  CHECK(kind_is_leaf(NodeKind::number));
  CHECK(kind_is_leaf(NodeKind::annotation));
  CHECK(kind_is_leaf(NodeKind::body));

  for (NodeKind parent : kinds) {
    for (NodeKind child : kinds) {
      bool want = (parent == NodeKind::document && child == NodeKind::page) ||
                  (parent == NodeKind::page &&
                   (child == NodeKind::section || child == NodeKind::number)) ||
                  (parent == NodeKind::section &&
                   (child == NodeKind::annotation || child == NodeKind::body));
      CHECK(kind_allows_child(parent, child) == want);
    }
  }
}

TEST_CASE("graph building and edge counts") {
  DocumentGraph g = five_node_example();
  g.validate();
  CHECK(g.node_count() == 5);
  CHECK(g.hierarchy_edge_count() == 4);
  CHECK(g.reading_order_edge_count() == 1);  // number then section under the page

  CHECK_THROWS_AS(g.add_node(0, NodeKind::section), ContractError);     // S under D
  CHECK_THROWS_AS(g.add_node(2, NodeKind::body), ContractError);        // child of a leaf
  CHECK_THROWS_AS(g.add_node(-1, NodeKind::document), ContractError);   // second root
  CHECK_THROWS_AS(g.add_node(1, NodeKind::section, "txt"), ContractError);

  DocumentGraph bad = five_node_example();
  bad.nodes[1].text = "oops";  // page is not a leaf
  CHECK_THROWS_AS(bad.validate(), ContractError);

  DocumentGraph cycle = five_node_example();
  cycle.nodes[3].parent = 4;
  CHECK_THROWS_AS(cycle.validate(), ContractError);
}

TEST_CASE("strict token parsing builds the documented example") {
  DocumentGraph g = tokens_to_graph("<D><P><N>1</N><S><B>abc</B></S></P></D>");
  g.validate();
  REQUIRE(g.node_count() == 5);
  CHECK(g.nodes[0].kind == NodeKind::document);
  CHECK(g.nodes[1].kind == NodeKind::page);
  CHECK(g.nodes[2].kind == NodeKind::number);
  CHECK(g.nodes[2].text == "1");
  CHECK(g.nodes[3].kind == NodeKind::section);
  CHECK(g.nodes[4].kind == NodeKind::body);
  CHECK(g.nodes[4].text == "abc");
  CHECK(g.nodes[1].children == std::vector<std::int32_t>{2, 3});
  CHECK(graph_equal(g, five_node_example()));
}

TEST_CASE("strict token parsing reports positions") {
  try {
    tokens_to_graph("<D><P></D>");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.position == 6);  // the </D> that hits the still-open <P>
    CHECK(std::string(e.what()).find("<P>") != std::string::npos);
  }
  try {
    tokens_to_graph("<D>x</D>");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.position == 3);
  }
  CHECK_THROWS_AS(tokens_to_graph(""), ParseError);
  CHECK_THROWS_AS(tokens_to_graph("plain"), ParseError);
  CHECK_THROWS_AS(tokens_to_graph("<D></D>x"), ParseError);
  CHECK_THROWS_AS(tokens_to_graph("<D></D><D></D>"), ParseError);
  CHECK_THROWS_AS(tokens_to_graph("<D><S></S></D>"), ParseError);  // S needs a page
  CHECK_THROWS_AS(tokens_to_graph("<D><P>"), ParseError);          // unclosed at eof
  CHECK_THROWS_AS(tokens_to_graph("<Q>"), ParseError);             // not a tag, so stray text
}

TEST_CASE("token round trip is the identity on random graphs") {
  RngStream rng(140);
  for (int i = 0; i < 100; ++i) {
    DocumentGraph g = random_document_graph(rng, 24);
    g.validate();
    std::string toks = graph_to_tokens(g);
    DocumentGraph back = tokens_to_graph(toks);
    CHECK(graph_equal(g, back));
    CHECK(graph_to_tokens(back) == toks);
  }
}

TEST_CASE("lenient parsing auto-closes and records repairs") {
  LenientParse lp = tokens_to_graph_lenient("<D><P>");
  CHECK(lp.repairs.size() == 2);
  lp.graph.validate();
  CHECK(lp.graph.node_count() == 2);

  LenientParse rooted = tokens_to_graph_lenient("<P><N>7</N>");
  rooted.graph.validate();
  CHECK(rooted.graph.node_count() == 3);
  CHECK(rooted.graph.nodes[0].kind == NodeKind::document);
  CHECK(rooted.graph.nodes[2].text == "7");
  CHECK(!rooted.repairs.empty());
  CHECK(rooted.repairs.front().message.find("<D>") != std::string::npos);

  // a new page implicitly closes the open section and page
  LenientParse pages = tokens_to_graph_lenient("<D><P><S><A>x</A><P><N>2</N></P></D>");
  pages.graph.validate();
  CHECK(pages.graph.nodes[0].children.size() == 2);
  CHECK(pages.repairs.size() == 2);  // auto-closed <S>, auto-closed <P>

  LenientParse stray = tokens_to_graph_lenient("<D>junk<P></P></D>");
  stray.graph.validate();
  CHECK(stray.graph.node_count() == 2);
  REQUIRE(stray.repairs.size() == 1);
  CHECK(stray.repairs[0].message.find("dropped text") != std::string::npos);

  LenientParse unmatched = tokens_to_graph_lenient("<D></S><P></P></D>");
  unmatched.graph.validate();
  CHECK(unmatched.graph.node_count() == 2);
  CHECK(unmatched.repairs.size() == 1);

  // well-formed input parses with no repairs and the same graph as strict mode
  std::string toks = graph_to_tokens(five_node_example());
  LenientParse clean = tokens_to_graph_lenient(toks);
  CHECK(clean.repairs.empty());
  CHECK(graph_equal(clean.graph, five_node_example()));
}

TEST_CASE("canonical xml serialization") {
  DocumentGraph root_only;
  root_only.add_node(-1, NodeKind::document);
  CHECK(graph_to_xml(root_only) == "<D/>\n");

  CHECK(graph_to_xml(five_node_example()) ==
        "<D>\n"
        "  <P>\n"
        "    <N>1</N>\n"
        "    <S>\n"
        "      <B>abc</B>\n"
        "    </S>\n"
        "  </P>\n"
        "</D>\n");

  // section listed before the number still serializes number first
  DocumentGraph swapped;
  swapped.add_node(-1, NodeKind::document);
  std::int32_t p = swapped.add_node(0, NodeKind::page);
  std::int32_t s = swapped.add_node(p, NodeKind::section);
  swapped.add_node(s, NodeKind::body, "b");
  swapped.add_node(s, NodeKind::annotation, "a");  // annotation after body
  swapped.add_node(p, NodeKind::number, "3");
  CHECK(graph_to_xml(swapped) ==
        "<D>\n"
        "  <P>\n"
        "    <N>3</N>\n"
        "    <S>\n"
        "      <A>a</A>\n"
        "      <B>b</B>\n"
        "    </S>\n"
        "  </P>\n"
        "</D>\n");

  // two sections keep their reading order
  DocumentGraph two;
  two.add_node(-1, NodeKind::document);
  std::int32_t pg = two.add_node(0, NodeKind::page);
  std::int32_t s1 = two.add_node(pg, NodeKind::section);
  two.add_node(s1, NodeKind::body, "first");
  std::int32_t s2 = two.add_node(pg, NodeKind::section);
  two.add_node(s2, NodeKind::body, "second");
  std::string xml = graph_to_xml(two);
  CHECK(xml.find("first") < xml.find("second"));
  CHECK(xml ==
        "<D>\n"
        "  <P>\n"
        "    <S>\n"
        "      <B>first</B>\n"
        "    </S>\n"
        "    <S>\n"
        "      <B>second</B>\n"
        "    </S>\n"
        "  </P>\n"
        "</D>\n");
}

TEST_CASE("xml text escaping round trips") {
  DocumentGraph g;
  g.add_node(-1, NodeKind::document);
  std::int32_t p = g.add_node(0, NodeKind::page);
  std::int32_t s = g.add_node(p, NodeKind::section);
  g.add_node(s, NodeKind::body, "a<b&c>d");
  std::string xml = graph_to_xml(g);
  CHECK(xml.find("a&lt;b&amp;c&gt;d") != std::string::npos);
  DocumentGraph back = xml_to_graph(xml);
  CHECK(back.nodes[3].text == "a<b&c>d");
  CHECK(graph_equal(g, back));
}

TEST_CASE("xml round trip is byte identical on random graphs") {
  RngStream rng(141);
  for (int i = 0; i < 100; ++i) {
    DocumentGraph g = random_document_graph(rng, 24);
    std::string xml = graph_to_xml(g);
    DocumentGraph back = xml_to_graph(xml);
    CHECK(graph_equal(g, back));  // generator emits canonical order already
    CHECK(graph_to_xml(back) == xml);
  }
}

TEST_CASE("xml parser rejects bad documents") {
  CHECK_THROWS_AS(xml_to_graph("<Z/>"), ParseError);
  CHECK_THROWS_AS(xml_to_graph("<D>\n  <S/>\n</D>\n"), ParseError);  // schema violation
  CHECK_THROWS_AS(xml_to_graph("<D>\n  <P>\n</D>\n"), ParseError);
  CHECK_THROWS_AS(xml_to_graph(""), ParseError);
  CHECK_THROWS_AS(xml_to_graph("<D/>\n<D/>\n"), ParseError);
}

TEST_CASE("edit distance basics") {
  DocumentGraph g = five_node_example();
  GedResult same = graph_edit_distance(g, g);
  CHECK(same.cost == 0);
  CHECK(same.exact);

  // an extra only-child leaf costs a node plus its hierarchy edge
  DocumentGraph base;
  base.add_node(-1, NodeKind::document);
  std::int32_t pg = base.add_node(0, NodeKind::page);
  std::int32_t sec = base.add_node(pg, NodeKind::section);
  DocumentGraph bigger = base;
  bigger.add_node(sec, NodeKind::body, "tail");
  GedResult extra = graph_edit_distance(base, bigger);
  CHECK(extra.cost == 2);
  CHECK(extra.exact);

  // a second sibling additionally brings a reading-order edge
  DocumentGraph sibling = five_node_example();
  sibling.add_node(3, NodeKind::body, "tail");
  GedResult with_order = graph_edit_distance(g, sibling);
  CHECK(with_order.cost == 3);
  CHECK(with_order.exact);

  // same topology, one leaf kind swapped: a single substitution
  DocumentGraph ann;
  ann.add_node(-1, NodeKind::document);
  std::int32_t p1 = ann.add_node(0, NodeKind::page);
  std::int32_t s1 = ann.add_node(p1, NodeKind::section);
  ann.add_node(s1, NodeKind::annotation, "x");
  DocumentGraph body;
  body.add_node(-1, NodeKind::document);
  std::int32_t p2 = body.add_node(0, NodeKind::page);
  std::int32_t s2 = body.add_node(p2, NodeKind::section);
  body.add_node(s2, NodeKind::body, "x");
  GedResult sub = graph_edit_distance(ann, body);
  CHECK(sub.cost == 1);
  CHECK(sub.exact);
}

TEST_CASE("edit distance matches the exhaustive oracle on small graphs") {
  RngStream rng(142);
  std::vector<DocumentGraph> pool;
  while (pool.size() < 10) {
    DocumentGraph g = random_document_graph(rng, 5);
    pool.push_back(g);
  }
  for (const auto& a : pool) {
    for (const auto& b : pool) {
      GedResult r = graph_edit_distance(a, b);
      REQUIRE(r.exact);
      long want = brute_force_ged(a, b);
      REQUIRE(r.cost == want);
    }
  }
  // symmetry comes with optimality but assert it directly
  for (std::size_t i = 0; i < pool.size(); ++i)
    for (std::size_t j = i + 1; j < pool.size(); ++j)
      CHECK(graph_edit_distance(pool[i], pool[j]).cost ==
            graph_edit_distance(pool[j], pool[i]).cost);
}

TEST_CASE("edit distance triangle inequality on sampled triples") {
  RngStream rng(143);
  std::vector<DocumentGraph> pool;
  while (pool.size() < 7) pool.push_back(random_document_graph(rng, 5));
  std::vector<std::vector<std::int64_t>> d(pool.size(),
                                           std::vector<std::int64_t>(pool.size(), 0));
  for (std::size_t i = 0; i < pool.size(); ++i)
    for (std::size_t j = 0; j < pool.size(); ++j)
      d[i][j] = graph_edit_distance(pool[i], pool[j]).cost;
  for (std::size_t i = 0; i < pool.size(); ++i)
    for (std::size_t j = 0; j < pool.size(); ++j)
      for (std::size_t k = 0; k < pool.size(); ++k)
        CHECK(d[i][k] <= d[i][j] + d[j][k]);
}

TEST_CASE("large graphs fall back to the greedy bound") {
  RngStream rng(144);
  DocumentGraph big;
  big.add_node(-1, NodeKind::document);
  for (int p = 0; p < 3; ++p) {
    std::int32_t page = big.add_node(0, NodeKind::page);
    big.add_node(page, NodeKind::number, std::to_string(p));
    for (int s = 0; s < 2; ++s) {
      std::int32_t sec = big.add_node(page, NodeKind::section);
      big.add_node(sec, NodeKind::body, "text");
    }
  }
  REQUIRE(big.node_count() > 10);
  GedResult self = graph_edit_distance(big, big);
  CHECK(!self.exact);
  CHECK(self.cost == 0);  // greedy still finds the identity mapping

  DocumentGraph other = big;
  other.add_node(static_cast<std::int32_t>(other.nodes.size() - 1) - 1, NodeKind::body, "x");
  GedResult near = graph_edit_distance(big, other);
  CHECK(!near.exact);
  CHECK(near.cost >= 2);  // upper bound, never below the true distance
  std::int64_t worst = big.node_count() + other.node_count() +
                       big.hierarchy_edge_count() + other.hierarchy_edge_count() +
                       big.reading_order_edge_count() + other.reading_order_edge_count();
  CHECK(near.cost <= worst);
}

TEST_CASE("postprocess with the identity corrector is the identity") {
  std::vector<std::string> inputs = {
      "<D><P><N>1</N><S><B>abc</B></S></P></D>",
      "<D><P><S><B>hello world</B><A>margin note</A></S></P></D>",
      "<D><P>",            // malformed input passes through untouched
      "no tags at all",
      "",
  };
  for (const auto& s : inputs) {
    PostprocessResult r = postprocess_tokens(s, identity_corrector());
    CHECK(r.tokens == s);
    CHECK(r.warnings.empty());
  }
}

TEST_CASE("postprocess corrects text but never tags") {
  auto upper = [](const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return out;
  };
  std::string in = "<D><P><N>1</N><S><B>ab c</B></S></P></D>";
  PostprocessResult r = postprocess_tokens(in, upper);
  CHECK(r.tokens == "<D><P><N>1</N><S><B>AB C</B></S></P></D>");
  CHECK(tag_sequence(r.tokens) == tag_sequence(in));
  CHECK(r.warnings.empty());
}

TEST_CASE("postprocess strips tags a corrector tries to inject") {
  auto saboteur = [](const std::string& s) { return s + "</B><P>"; };
  std::string in = "<D><P><S><B>abc</B></S></P></D>";
  PostprocessResult r = postprocess_tokens(in, saboteur);
  CHECK(tag_sequence(r.tokens) == tag_sequence(in));
  CHECK(!r.warnings.empty());
  CHECK(r.tokens == "<D><P><S><B>abc</B></S></P></D>");
}

TEST_CASE("postprocess preserves concatenated text content under identity") {
  RngStream rng(145);
  for (int i = 0; i < 20; ++i) {
    std::string toks = graph_to_tokens(random_document_graph(rng, 16));
    PostprocessResult r = postprocess_tokens(toks, identity_corrector());
    auto strip_tags = [](const std::string& s) {
      std::string out;
      std::size_t i2 = 0;
      while (i2 < s.size()) {
        if (s[i2] == '<') {
          std::size_t close = s.find('>', i2);
          std::size_t j = i2 + (s[i2 + 1] == '/' ? 2 : 1);
          if (close != std::string::npos && close == j + 1 &&
              std::string("DPSNAB").find(s[j]) != std::string::npos) {
            i2 = close + 1;
            continue;
          }
        }
        out.push_back(s[i2]);
        ++i2;
      }
      return out;
    };
    CHECK(strip_tags(r.tokens) == strip_tags(toks));
  }
}

TEST_CASE("random graphs are valid and respect the budget") {
  RngStream rng(146);
  for (int i = 0; i < 200; ++i) {
    std::int64_t cap = rng.uniform_int(1, 20);
    DocumentGraph g = random_document_graph(rng, cap);
    g.validate();
    CHECK(g.node_count() >= 1);
    CHECK(g.node_count() <= cap);
  }
  CHECK_THROWS_AS(random_document_graph(rng, 0), ParameterError);
}
