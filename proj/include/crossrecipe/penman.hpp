#pragma once

// PENMAN graphs: parsing into instance, relation and attribute triples, and
// printing back.

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "crossrecipe/error.hpp"

namespace crossrecipe {

struct AmrEdge {
  std::string role;
  std::string source;
  std::string target;
  bool target_is_var = false;
  bool quoted = false;  // constant written as a string literal

  bool operator==(const AmrEdge&) const = default;
};

struct AmrGraph {
  std::string root;
  std::vector<std::pair<std::string, std::string>> instances;  // (variable, concept)
  std::vector<AmrEdge> edges;  // relations (variable target) and attributes

  std::size_t triple_count() const { return instances.size() + edges.size(); }

  std::vector<std::string> variables() const {
    std::vector<std::string> out;
    for (const auto& [v, c] : instances) out.push_back(v);
    return out;
  }

  /// (label, source, target) with instances labelled "instance".
  std::set<std::tuple<std::string, std::string, std::string>> triples() const {
    std::set<std::tuple<std::string, std::string, std::string>> out;
    for (const auto& [v, c] : instances) out.emplace("instance", v, c);
    for (const auto& e : edges) out.emplace(e.role, e.source, e.target);
    return out;
  }
};

namespace detail {

inline bool looks_like_variable(std::string_view s) {
  if (s.empty() || !std::islower(static_cast<unsigned char>(s[0]))) return false;
  return std::all_of(s.begin() + 1, s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

class PenmanParser {
 public:
  explicit PenmanParser(std::string_view text) : text_(text) {}

  AmrGraph parse() {
    skip_space();
    if (pos_ >= text_.size()) fail("empty input");
    graph_.root = parse_node();
    skip_space();
    if (pos_ < text_.size()) fail("trailing content after graph");
    resolve();
    return std::move(graph_);
  }

 private:
  struct RawEdge {
    std::string role, source, value;
    bool child = false, quoted = false;
    std::size_t pos = 0;
  };

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::SyntaxError, what + " at position " + std::to_string(pos_));
  }

  void skip_space() {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '#' && (pos_ == 0 || text_[pos_ - 1] == '\n')) {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  static bool symbol_char(char c) {
    return !std::isspace(static_cast<unsigned char>(c)) && c != '(' && c != ')' && c != '"' &&
           c != ':' && c != '/';
  }

  // Alignment markers such as ~e.3 are dropped.
  void skip_alignment() {
    if (pos_ < text_.size() && text_[pos_] == '~')
      while (pos_ < text_.size() && symbol_char(text_[pos_])) ++pos_;
  }

  std::string symbol() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && symbol_char(text_[pos_]) && text_[pos_] != '~') ++pos_;
    if (pos_ == start) fail("expected symbol");
    std::string out(text_.substr(start, pos_ - start));
    skip_alignment();
    return out;
  }

  std::string quoted() {
    ++pos_;  // opening quote
    std::string out;
    while (pos_ < text_.size() && text_[pos_] != '"') {
      if (text_[pos_] == '\\' && pos_ + 1 < text_.size()) ++pos_;
      out += text_[pos_++];
    }
    if (pos_ >= text_.size()) fail("unterminated string");
    ++pos_;
    skip_alignment();
    return out;
  }

  std::string parse_node() {
    skip_space();
    if (pos_ >= text_.size() || text_[pos_] != '(') fail("expected '('");
    ++pos_;
    skip_space();
    const std::string var = symbol();
    if (!declared_.insert(var).second)
      throw Error(ErrorCode::DuplicateVariable, "variable '" + var + "' declared twice");
    skip_space();
    if (pos_ >= text_.size() || text_[pos_] != '/') fail("expected '/'");
    ++pos_;
    skip_space();
    if (pos_ >= text_.size()) fail("expected concept");
    std::string label = text_[pos_] == '"' ? quoted() : symbol();
    graph_.instances.emplace_back(var, std::move(label));
    for (;;) {
      skip_space();
      if (pos_ >= text_.size()) fail("unbalanced parentheses");
      if (text_[pos_] == ')') {
        ++pos_;
        return var;
      }
      if (text_[pos_] != ':') fail("expected role or ')'");
      ++pos_;
      RawEdge e;
      e.role = symbol();
      e.source = var;
      skip_space();
      e.pos = pos_;
      if (pos_ >= text_.size()) fail("expected role value");
      if (text_[pos_] == '(') {
        e.value = parse_node();
        e.child = true;
      } else if (text_[pos_] == '"') {
        e.value = quoted();
        e.quoted = true;
      } else {
        e.value = symbol();
      }
      raw_.push_back(std::move(e));
    }
  }

  void resolve() {
    std::set<std::tuple<std::string, std::string, std::string>> seen;
    for (const auto& r : raw_) {
      AmrEdge e{r.role, r.source, r.value, false, r.quoted};
      if (!r.quoted && (r.child || declared_.count(r.value))) {
        e.target_is_var = true;
      } else if (!r.quoted && looks_like_variable(r.value)) {
        throw Error(ErrorCode::UndeclaredVariable, "'" + r.value + "' is not declared (position " +
                                                       std::to_string(r.pos) + ")");
      }
      const bool inverse = e.target_is_var && e.role.size() > 3 &&
                           e.role.compare(e.role.size() - 3, 3, "-of") == 0 && e.role != "consist-of";
      if (inverse) {
        e.role.resize(e.role.size() - 3);
        std::swap(e.source, e.target);
      }
      if (seen.emplace(e.role, e.source, e.target).second) graph_.edges.push_back(std::move(e));
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  AmrGraph graph_;
  std::set<std::string> declared_;
  std::vector<RawEdge> raw_;
};

inline bool needs_quotes(const std::string& s, const std::set<std::string>& vars) {
  if (s.empty() || vars.count(s) || looks_like_variable(s)) return true;
  return std::any_of(s.begin(), s.end(), [](char c) {
    return std::isspace(static_cast<unsigned char>(c)) || c == '(' || c == ')' || c == ':' ||
           c == '/' || c == '"' || c == '~';
  });
}

inline std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

}  // namespace detail

/// One PENMAN s-expression. Throws SyntaxError, DuplicateVariable or
/// UndeclaredVariable.
inline AmrGraph parse_penman(std::string_view text) { return detail::PenmanParser(text).parse(); }

/// Graphs separated by blank lines; comment-only blocks are skipped.
inline std::vector<AmrGraph> parse_penman_blocks(std::string_view text) {
  std::vector<AmrGraph> out;
  std::string block;
  auto flush = [&] {
    bool content = false;
    std::size_t line_start = 0;
    while (line_start < block.size()) {
      std::size_t end = block.find('\n', line_start);
      if (end == std::string::npos) end = block.size();
      std::string_view line(block.data() + line_start, end - line_start);
      auto first = line.find_first_not_of(" \t\r");
      if (first != std::string_view::npos && line[first] != '#') content = true;
      line_start = end + 1;
    }
    if (content) out.push_back(parse_penman(block));
    block.clear();
  };
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) flush();
    else block.append(line).append("\n");
    start = end + 1;
  }
  flush();
  return out;
}

/// Depth-first from the root; edges reached from their target are written
/// as inverse roles.
inline std::string print_penman(const AmrGraph& g) {
  std::map<std::string, std::string> concept_of;
  std::set<std::string> vars;
  for (const auto& [v, c] : g.instances) {
    concept_of[v] = c;
    vars.insert(v);
  }
  std::vector<bool> printed(g.edges.size(), false);
  std::set<std::string> visited;
  std::string out;

  auto value = [&](const std::string& s, bool quoted) {
    return quoted || detail::needs_quotes(s, vars) ? detail::quote(s) : s;
  };

  auto node = [&](auto&& self, const std::string& var, int depth) -> void {
    visited.insert(var);
    const std::string& c = concept_of[var];
    out += "(" + var + " / " + (detail::needs_quotes(c, vars) ? detail::quote(c) : c);
    const std::string indent(static_cast<std::size_t>(depth + 1) * 4, ' ');
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
      if (printed[i]) continue;
      const AmrEdge& e = g.edges[i];
      std::string other, role;
      if (e.source == var) {
        other = e.target;
        role = e.role;
      } else if (e.target_is_var && e.target == var) {
        other = e.source;
        role = e.role + "-of";
      } else {
        continue;
      }
      printed[i] = true;
      out += "\n" + indent + ":" + role + " ";
      if (!e.target_is_var) out += value(other, e.quoted);
      else if (visited.count(other)) out += other;
      else self(self, other, depth + 1);
    }
    out += ")";
  };
  node(node, g.root, 0);
  return out;
}

}  // namespace crossrecipe
