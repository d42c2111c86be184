#pragma once

// Reader and writer for the line-oriented `.dft` format:
//
//   dft 1
//   mission_time <float>                          (optional)
//   be <name> exp mttf=<float>
//   be <name> weibull scale=<float> shape=<float>
//   be <name> lognormal mu=<float> sigma=<float>
//   be <name> normal mean=<float> sd=<float>
//   gate <name> and|or|vote:<k>|pand|seq|spare:a=<float> <child>...
//   top <name>
//
// `#` starts a comment. Identifiers match [A-Za-z_][A-Za-z0-9_]* and are
// case-sensitive. Children may be declared after the gate that uses them.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dftmc/distributions.hpp"
#include "dftmc/error.hpp"
#include "dftmc/tree.hpp"

namespace dftmc {

struct TreeDocument final {
  int version = 1;
  std::optional<double> mission_time;
  std::vector<EventDecl> events;
  std::vector<GateDecl> gates;
  std::string top;

  /// Builds and validates the fault tree described by the document.
  FaultTree to_tree() const { return FaultTree::validate(events, gates, top); }
};

/// Structural equality: same header, mission time, top and basic events in
/// the same order; gates compared as a name-keyed set.
inline bool equivalent(const TreeDocument& a, const TreeDocument& b) {
  if (a.version != b.version || a.mission_time != b.mission_time || a.top != b.top ||
      a.events != b.events || a.gates.size() != b.gates.size()) {
    return false;
  }
  std::unordered_map<std::string_view, const GateDecl*> by_name;
  for (const GateDecl& g : a.gates) by_name.emplace(g.name, &g);
  for (const GateDecl& g : b.gates) {
    auto it = by_name.find(g.name);
    if (it == by_name.end() || !(*it->second == g)) return false;
  }
  return true;
}

namespace detail {

struct Token {
  std::string_view text;
  std::size_t column;  // 1-based
};

inline std::vector<Token> tokenize(std::string_view line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    const char c = line[i];
    if (c == '#') break;
    if (c == ' ' || c == '\t' || c == '\r') {
      ++i;
      continue;
    }
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r' &&
           line[i] != '#') {
      ++i;
    }
    out.push_back({line.substr(start, i - start), start + 1});
  }
  return out;
}

inline bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  auto alpha = [](char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_'; };
  if (!alpha(s[0])) return false;
  for (char c : s.substr(1)) {
    if (!alpha(c) && !(c >= '0' && c <= '9')) return false;
  }
  return true;
}

class LineParser {
 public:
  LineParser(std::size_t line_no, std::vector<Token> tokens)
      : line_(line_no), tokens_(std::move(tokens)) {}

  [[noreturn]] void fail(const Token& at, const std::string& msg) const {
    throw ParseError(line_, at.column, msg);
  }
  [[noreturn]] void fail_end(const std::string& msg) const {
    const Token& last = tokens_.back();
    throw ParseError(line_, last.column + last.text.size(), msg);
  }

  std::size_t size() const { return tokens_.size(); }
  const Token& at(std::size_t i) const { return tokens_[i]; }

  const Token& require(std::size_t i, const char* what) const {
    if (i >= tokens_.size()) fail_end(std::string("expected ") + what);
    return tokens_[i];
  }

  void expect_count(std::size_t n) const {
    if (tokens_.size() > n) fail(tokens_[n], "unexpected token '" + std::string(tokens_[n].text) + "'");
  }

  std::string identifier(std::size_t i, const char* what) const {
    const Token& t = require(i, what);
    if (!is_identifier(t.text)) fail(t, "invalid " + std::string(what) + " '" + std::string(t.text) + "'");
    return std::string(t.text);
  }

  double number(const Token& t, std::string_view text) const {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) {
      fail(t, "invalid number '" + std::string(text) + "'");
    }
    return value;
  }

  /// Reads `key=<float>` from token i.
  double keyed_number(std::size_t i, std::string_view key) const {
    const Token& t = require(i, (std::string(key) + "=<value>").c_str());
    if (t.text.size() <= key.size() + 1 || t.text.substr(0, key.size()) != key ||
        t.text[key.size()] != '=') {
      fail(t, "expected '" + std::string(key) + "=<value>', got '" + std::string(t.text) + "'");
    }
    return number(t, t.text.substr(key.size() + 1));
  }

 private:
  std::size_t line_;
  std::vector<Token> tokens_;
};

inline Distribution parse_law(const LineParser& p) {
  const Token& fam = p.require(2, "distribution family");
  auto build = [&](auto&& make) {
    try {
      return make();
    } catch (const DistributionError& e) {
      p.fail(fam, e.what());
    }
  };
  if (fam.text == "exp") {
    const double mttf = p.keyed_number(3, "mttf");
    p.expect_count(4);
    return build([&] { return Distribution::exponential(mttf); });
  }
  if (fam.text == "weibull") {
    const double sc = p.keyed_number(3, "scale");
    const double sh = p.keyed_number(4, "shape");
    p.expect_count(5);
    return build([&] { return Distribution::weibull(sc, sh); });
  }
  if (fam.text == "lognormal") {
    const double mu = p.keyed_number(3, "mu");
    const double sigma = p.keyed_number(4, "sigma");
    p.expect_count(5);
    return build([&] { return Distribution::lognormal(mu, sigma); });
  }
  if (fam.text == "normal") {
    const double mean = p.keyed_number(3, "mean");
    const double sd = p.keyed_number(4, "sd");
    p.expect_count(5);
    return build([&] { return Distribution::normal(mean, sd); });
  }
  p.fail(fam, "unknown distribution family '" + std::string(fam.text) + "'");
}

inline GateType parse_gate_type(const LineParser& p) {
  const Token& t = p.require(2, "gate kind");
  const std::string_view s = t.text;
  if (s == "and") return GateType::and_gate();
  if (s == "or") return GateType::or_gate();
  if (s == "pand") return GateType::pand();
  if (s == "seq") return GateType::seq();
  if (s.starts_with("vote:")) {
    const std::string_view k_text = s.substr(5);
    std::uint32_t k = 0;
    const auto [ptr, ec] = std::from_chars(k_text.data(), k_text.data() + k_text.size(), k);
    if (k_text.empty() || ec != std::errc() || ptr != k_text.data() + k_text.size() || k == 0) {
      p.fail(t, "vote threshold must be a positive integer, got '" + std::string(k_text) + "'");
    }
    return GateType::voting(k);
  }
  if (s.starts_with("spare:a=")) {
    const double a = p.number(t, s.substr(8));
    if (!(a >= 0.0 && a <= 1.0)) p.fail(t, "spare dormancy outside [0, 1]");
    return GateType::spare(a);
  }
  p.fail(t, "unknown gate kind '" + std::string(s) + "'");
}

}  // namespace detail

/// Parses a `.dft` document. Throws ParseError with the 1-based line and
/// column of the first problem.
inline TreeDocument parse(std::string_view text) {
  TreeDocument doc;
  bool have_header = false;
  std::size_t top_line = 0;
  struct Where {
    std::size_t line;
    std::size_t column;
  };
  std::unordered_map<std::string, Where> declared;
  // child name -> first use, for the undeclared-child check at the end
  std::vector<std::pair<std::string, Where>> uses;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    const std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;

    detail::LineParser p(line_no, detail::tokenize(line));
    if (p.size() == 0) continue;
    const detail::Token& kw = p.at(0);

    if (!have_header) {
      if (kw.text != "dft") p.fail(kw, "expected header 'dft 1'");
      const detail::Token& v = p.require(1, "format version");
      if (v.text != "1") p.fail(v, "unsupported format version '" + std::string(v.text) + "'");
      p.expect_count(2);
      have_header = true;
      continue;
    }

    auto declare = [&](const std::string& name, const detail::Token& at) {
      auto [it, fresh] = declared.emplace(name, Where{line_no, at.column});
      if (!fresh) {
        p.fail(at, "duplicate declaration of '" + name + "' (first declared on line " +
                       std::to_string(it->second.line) + ")");
      }
    };

    if (kw.text == "dft") {
      p.fail(kw, "duplicate header");
    } else if (kw.text == "mission_time") {
      if (doc.mission_time) p.fail(kw, "duplicate mission_time");
      const detail::Token& v = p.require(1, "mission time value");
      const double t = p.number(v, v.text);
      if (!(t > 0.0)) p.fail(v, "mission time must be positive");
      p.expect_count(2);
      doc.mission_time = t;
    } else if (kw.text == "be") {
      std::string name = p.identifier(1, "basic event name");
      Distribution law = detail::parse_law(p);
      declare(name, p.at(1));
      doc.events.push_back({std::move(name), law});
    } else if (kw.text == "gate") {
      std::string name = p.identifier(1, "gate name");
      GateType type = detail::parse_gate_type(p);
      GateDecl g{name, type, {}};
      for (std::size_t i = 3; i < p.size(); ++i) {
        g.children.push_back(p.identifier(i, "child name"));
        uses.emplace_back(g.children.back(), Where{line_no, p.at(i).column});
      }
      declare(name, p.at(1));
      doc.gates.push_back(std::move(g));
    } else if (kw.text == "top") {
      if (top_line != 0) {
        p.fail(kw, "duplicate top declaration (first on line " + std::to_string(top_line) + ")");
      }
      doc.top = p.identifier(1, "top node name");
      p.expect_count(2);
      top_line = line_no;
      uses.emplace_back(doc.top, Where{line_no, p.at(1).column});
    } else {
      p.fail(kw, "unknown keyword '" + std::string(kw.text) + "'");
    }
  }

  if (!have_header) throw ParseError(line_no, 1, "missing header 'dft 1'");
  for (const auto& [name, where] : uses) {
    if (!declared.contains(name)) {
      throw ParseError(where.line, where.column, "undeclared node '" + name + "'");
    }
  }
  if (top_line == 0) throw ParseError(line_no, 1, "missing top declaration");
  return doc;
}

/// Shortest decimal text that reads back to exactly `x`.
inline std::string format_double(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

/// Canonical text: header, mission time, basic events in declaration
/// order, gates children-first, top. Throws ValidationError for documents
/// that do not describe a valid tree.
inline std::string serialize(const TreeDocument& doc) {
  const FaultTree tree = doc.to_tree();
  std::string out = "dft " + std::to_string(doc.version) + "\n";
  if (doc.mission_time) out += "mission_time " + format_double(*doc.mission_time) + "\n";
  for (const EventDecl& e : doc.events) {
    const Distribution& d = e.law;
    out += "be " + e.name + " ";
    switch (d.family()) {
      case Family::Exponential:
        out += "exp mttf=" + format_double(d.first());
        break;
      case Family::Weibull:
        out += "weibull scale=" + format_double(d.first()) + " shape=" + format_double(d.second());
        break;
      case Family::LogNormal:
        out += "lognormal mu=" + format_double(d.first()) + " sigma=" + format_double(d.second());
        break;
      case Family::Normal:
        out += "normal mean=" + format_double(d.first()) + " sd=" + format_double(d.second());
        break;
    }
    out += "\n";
  }
  for (std::size_t node : tree.evaluation_order()) {
    const FaultTree::Gate& g = tree.gate(node);
    out += "gate " + g.name + " ";
    switch (g.type.kind) {
      case GateKind::Voting:
        out += "vote:" + std::to_string(g.type.k);
        break;
      case GateKind::Spare:
        out += "spare:a=" + format_double(g.type.dormancy);
        break;
      default:
        out += gate_keyword(g.type.kind);
        break;
    }
    for (std::size_t c : g.children) out += " " + tree.name(c);
    out += "\n";
  }
  out += "top " + doc.top + "\n";
  return out;
}

}  // namespace dftmc
