#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "scriptor/errors.hpp"
#include "scriptor/rng.hpp"

namespace scriptor {

// Document hierarchy node kinds. The tree is
//   document -> page -> {number, section} -> section holds {annotation, body}
// and number, annotation, body are text-bearing leaves.
enum class NodeKind : std::int8_t { document, page, section, number, annotation, body };

char kind_letter(NodeKind kind);
NodeKind kind_from_letter(char letter);  // ParameterError on anything outside DPSNAB
bool kind_is_leaf(NodeKind kind);
bool kind_allows_child(NodeKind parent, NodeKind child);

struct LayoutNode {
  NodeKind kind = NodeKind::document;
  std::string text;                      // payload, leaves only
  std::int32_t parent = -1;              // index into DocumentGraph::nodes, -1 for the root
  std::vector<std::int32_t> children;    // child indices in reading order
};

struct DocumentGraph {
  std::vector<LayoutNode> nodes;  // nodes[0] is the root once the graph is non-empty

  // Appends a node under parent (or the root when parent is -1) and returns its index.
  // Enforces the kind constraints up front; reading order is insertion order.
  std::int32_t add_node(std::int32_t parent, NodeKind kind, std::string text = "");

  std::int64_t node_count() const { return static_cast<std::int64_t>(nodes.size()); }
  std::int64_t hierarchy_edge_count() const;      // one per parent->child link
  std::int64_t reading_order_edge_count() const;  // one per consecutive sibling pair

  // Full invariant check: single document root, consistent parent/child links,
  // kind constraints, text only on leaves. Throws ContractError.
  void validate() const;
};

// Structural equality by simultaneous preorder walk (indices may differ).
bool graph_equal(const DocumentGraph& a, const DocumentGraph& b);

struct ParseRepair {
  std::size_t position = 0;
  std::string message;
};

struct LenientParse {
  DocumentGraph graph;
  std::vector<ParseRepair> repairs;
};

// Token text uses tags literally: "<D><P><N>1</N>...</P></D>". Strict parsing
// throws ParseError (with byte position) on any imbalance, misplaced tag, or
// text outside a leaf. The lenient variant auto-inserts a missing root,
// auto-closes open elements, drops unattachable content, and reports each
// repair with its position.
DocumentGraph tokens_to_graph(const std::string& tokens);
LenientParse tokens_to_graph_lenient(const std::string& tokens);
std::string graph_to_tokens(const DocumentGraph& g);

// Canonical XML: numbers before sections inside a page, annotations before
// bodies inside a section, two-space indentation, &<> escaped in text, childless
// elements self-closed ("<D/>" for the bare document). xml_to_graph accepts any
// whitespace between elements and throws ParseError on unknown elements or
// constraint violations; serializing its result reproduces canonical bytes.
std::string graph_to_xml(const DocumentGraph& g);
DocumentGraph xml_to_graph(const std::string& xml);

struct GedResult {
  std::int64_t cost = 0;
  bool exact = true;  // best-first exact search; false once the greedy bound takes over
};

// Graph edit distance under unit costs: node insert/delete 1, kind substitution 1,
// edge insert/delete 1. Hierarchy and reading-order edges are typed and compared
// separately. Exact for graphs of at most 10 nodes, greedy upper bound beyond.
GedResult graph_edit_distance(const DocumentGraph& a, const DocumentGraph& b);

struct PostprocessResult {
  std::string tokens;
  std::vector<std::string> warnings;
};

using TextCorrector = std::function<std::string(const std::string&)>;

TextCorrector identity_corrector();

// Splits raw token text into alternating tag runs and text runs, feeds each text
// run through the corrector, and reassembles with the tags verbatim. Corrector
// output that itself contains tags is stripped of them with a warning, so the
// tag sequence always survives untouched.
PostprocessResult postprocess_tokens(const std::string& raw, const TextCorrector& corrector);

// Random valid graph with canonical child order and at most max_nodes nodes.
DocumentGraph random_document_graph(RngStream& rng, std::int64_t max_nodes);

}  // namespace scriptor
