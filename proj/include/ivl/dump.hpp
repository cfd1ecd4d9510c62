#pragma once

// Artifact dumps of control flow graphs: Graphviz DOT, a JSON document with
// prefix S-expression commands that can be loaded back, and plain text.

#include <json.hpp>

#include <optional>
#include <sstream>
#include <string>

#include "ivl/cfg_to_dag.hpp"
#include "ivl/core_ir.hpp"
#include "ivl/error.hpp"
#include "ivl/printer.hpp"
#include "ivl/sexpr.hpp"

namespace ivl {

namespace detail {

inline std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace detail

/// DOT rendering. Loop heads are drawn double-circled and back-edges
/// dashed when loop information is given.
inline std::string cfg_to_dot(const Cfg& g, const std::string& name, const LoopInfo* loops = nullptr) {
  std::ostringstream os;
  os << "digraph \"" << detail::dot_escape(name) << "\" {\n";
  os << "  node [shape=box, fontname=\"monospace\"];\n";
  for (const auto& [id, blk] : g.blocks) {
    std::string label = detail::dot_escape(g.name_of(id)) + "\\l";
    for (const auto& c : blk.commands) label += detail::dot_escape(to_string(c)) + "\\l";
    os << "  B" << id << " [label=\"" << label << "\"";
    if (loops && loops->is_head(id)) os << ", shape=doublecircle";
    if (id == g.entry) os << ", penwidth=2";
    os << "];\n";
  }
  for (const auto& [from, tos] : g.successors) {
    for (BlockId to : tos) {
      os << "  B" << from << " -> B" << to;
      if (loops && loops->is_back_edge(from, to)) os << " [style=dashed]";
      os << ";\n";
    }
  }
  os << "}\n";
  return os.str();
}

inline nlohmann::json cfg_to_json(const Cfg& g) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& [id, blk] : g.blocks) {
    nlohmann::json cmds = nlohmann::json::array();
    for (const auto& c : blk.commands) cmds.push_back(sexpr::of(c));
    blocks.push_back({{"id", id}, {"label", blk.label}, {"commands", cmds}, {"successors", g.succs(id)}});
  }
  return {{"entry", g.entry}, {"blocks", blocks}};
}

inline Cfg cfg_from_json(const nlohmann::json& j) {
  try {
    Cfg g;
    g.entry = j.at("entry").get<BlockId>();
    for (const auto& b : j.at("blocks")) {
      Block blk;
      blk.id = b.at("id").get<BlockId>();
      if (b.contains("label")) blk.label = b.at("label").get<std::string>();
      for (const auto& c : b.at("commands")) blk.commands.push_back(sexpr::parse_command(c.get<std::string>()));
      if (g.blocks.count(blk.id)) throw MalformedInput("duplicate block id " + std::to_string(blk.id));
      g.successors[blk.id] = b.at("successors").get<std::vector<BlockId>>();
      g.blocks[blk.id] = std::move(blk);
    }
    g.validate();
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw MalformedInput(std::string("bad CFG document: ") + e.what());
  }
}

/// A dumped CFG together with the procedure and phase it belongs to.
struct CfgDocument {
  std::string procedure;
  std::string phase;  // "source", "dag" or "passive"
  Cfg cfg;
};

inline std::string document_to_json(const CfgDocument& d) {
  nlohmann::json j = {{"procedure", d.procedure}, {"phase", d.phase}, {"cfg", cfg_to_json(d.cfg)}};
  return j.dump(2) + "\n";
}

inline CfgDocument document_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedInput(std::string("bad JSON: ") + e.what());
  }
  CfgDocument d;
  try {
    d.procedure = j.at("procedure").get<std::string>();
    d.phase = j.at("phase").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw MalformedInput(std::string("bad CFG document: ") + e.what());
  }
  d.cfg = cfg_from_json(j.at("cfg"));
  return d;
}

/// Loop information for drawing, or nothing if the graph is irreducible.
inline std::optional<LoopInfo> loops_for_display(const Cfg& g) {
  try {
    return analyze_loops(g);
  } catch (const IrreducibleCfg&) {
    return std::nullopt;
  }
}

}  // namespace ivl
