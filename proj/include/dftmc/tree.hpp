#pragma once

// Fault-tree model (a DAG of basic events and gates) and failure-time
// propagation from basic events to TOP.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dftmc/distributions.hpp"
#include "dftmc/error.hpp"

namespace dftmc {

/// Failure time; +infinity means "never fails".
using Time = double;

inline constexpr Time kNever = std::numeric_limits<double>::infinity();

enum class GateKind { And, Or, Voting, Pand, Seq, Spare };

inline std::string_view gate_keyword(GateKind k) {
  switch (k) {
    case GateKind::And: return "and";
    case GateKind::Or: return "or";
    case GateKind::Voting: return "vote";
    case GateKind::Pand: return "pand";
    case GateKind::Seq: return "seq";
    case GateKind::Spare: return "spare";
  }
  return "?";
}

/// Gate kind plus its parameter (k for Voting, dormancy a for Spare).
struct GateType final {
  GateKind kind = GateKind::And;
  std::uint32_t k = 0;
  double dormancy = 0.0;

  static GateType and_gate() { return {GateKind::And}; }
  static GateType or_gate() { return {GateKind::Or}; }
  static GateType voting(std::uint32_t k) { return {GateKind::Voting, k}; }
  static GateType pand() { return {GateKind::Pand}; }
  static GateType seq() { return {GateKind::Seq}; }
  static GateType spare(double a) { return {GateKind::Spare, 0, a}; }

  bool operator==(const GateType&) const = default;
};

/// Output time of one gate from its ordered input times.
///
///   Or      min
///   And     max
///   Voting  k-th smallest input
///   Pand    last input if inputs are non-decreasing left to right, else never
///   Seq     sum
///   Spare   z1 if z2 < a*z1, else (1-a)*z1 + z2
inline Time eval_gate(const GateType& type, std::span<const Time> in) {
  switch (type.kind) {
    case GateKind::Or:
      return *std::min_element(in.begin(), in.end());
    case GateKind::And:
      return *std::max_element(in.begin(), in.end());
    case GateKind::Voting: {
      // Arity is small; a copy keeps the input untouched.
      Time buf[64] = {};
      std::vector<Time> heap_buf;
      Time* first = buf;
      if (in.size() > 64) {
        heap_buf.assign(in.begin(), in.end());
        first = heap_buf.data();
      } else {
        std::copy(in.begin(), in.end(), buf);
      }
      Time* nth = first + (type.k - 1);
      std::nth_element(first, nth, first + in.size());
      return *nth;
    }
    case GateKind::Pand:
      for (std::size_t i = 1; i < in.size(); ++i) {
        if (!(in[i - 1] <= in[i])) return kNever;
      }
      return in.back();
    case GateKind::Seq: {
      Time sum = 0.0;
      for (Time z : in) sum += z;
      return sum;
    }
    case GateKind::Spare: {
      const Time z1 = in[0];
      const Time z2 = in[1];
      const double a = type.dormancy;
      if (z2 < a * z1) return z1;
      // (1-a)*z1 vanishes at a = 1 even when z1 is infinite.
      const Time active = a == 1.0 ? 0.0 : (1.0 - a) * z1;
      return active + z2;
    }
  }
  return kNever;
}

struct EventDecl final {
  std::string name;
  Distribution law;

  bool operator==(const EventDecl&) const = default;
};

struct GateDecl final {
  std::string name;
  GateType type;
  std::vector<std::string> children;

  bool operator==(const GateDecl&) const = default;
};

/// Validated fault tree.
///
/// Node ids: 0..N-1 are basic events in declaration order, N..N+G-1 are gates
/// in declaration order. Gates are evaluated in a cached topological order,
/// so shared subtrees are computed once per sample.
class FaultTree {
 public:
  struct Gate final {
    std::string name;
    GateType type;
    std::vector<std::size_t> children;
  };

  /// Checks every structural invariant and builds the evaluation order.
  /// Throws ValidationError naming the offending node.
  static FaultTree validate(std::vector<EventDecl> events, std::vector<GateDecl> gates,
                            std::string top);

  std::size_t num_events() const noexcept { return events_.size(); }
  std::size_t num_gates() const noexcept { return gates_.size(); }
  std::size_t num_nodes() const noexcept { return events_.size() + gates_.size(); }

  const std::vector<EventDecl>& events() const noexcept { return events_; }
  const std::vector<Gate>& gates() const noexcept { return gates_; }
  std::size_t top() const noexcept { return top_; }
  bool is_event(std::size_t node) const noexcept { return node < events_.size(); }
  const Gate& gate(std::size_t node) const { return gates_[node - events_.size()]; }
  const std::string& name(std::size_t node) const {
    return is_event(node) ? events_[node].name : gate(node).name;
  }

  /// Gate node ids, children before parents.
  const std::vector<std::size_t>& evaluation_order() const noexcept { return order_; }

  std::size_t count(GateKind k) const {
    return static_cast<std::size_t>(std::count_if(
        gates_.begin(), gates_.end(), [k](const Gate& g) { return g.type.kind == k; }));
  }

  bool is_static() const {
    return std::all_of(gates_.begin(), gates_.end(), [](const Gate& g) {
      return g.type.kind == GateKind::And || g.type.kind == GateKind::Or ||
             g.type.kind == GateKind::Voting;
    });
  }

  /// TOP failure time using caller-owned scratch of size num_nodes().
  Time evaluate(std::span<const Time> sample, std::span<Time> scratch) const {
    std::copy(sample.begin(), sample.end(), scratch.begin());
    Time inputs[64];
    std::vector<Time> heap_inputs;
    for (std::size_t node : order_) {
      const Gate& g = gate(node);
      Time* in = inputs;
      if (g.children.size() > 64) {
        heap_inputs.resize(g.children.size());
        in = heap_inputs.data();
      }
      for (std::size_t c = 0; c < g.children.size(); ++c) in[c] = scratch[g.children[c]];
      scratch[node] = eval_gate(g.type, std::span<const Time>(in, g.children.size()));
    }
    return scratch[top_];
  }

  /// S(t): TOP failure time for one vector of basic-event failure times.
  Time top_time(std::span<const Time> sample) const {
    if (sample.size() != events_.size()) {
      throw ValidationError("sample has " + std::to_string(sample.size()) +
                            " entries, tree has " + std::to_string(events_.size()) +
                            " basic events");
    }
    std::vector<Time> scratch(num_nodes());
    return evaluate(sample, scratch);
  }

 private:
  std::vector<EventDecl> events_;
  std::vector<Gate> gates_;
  std::size_t top_ = 0;
  std::vector<std::size_t> order_;
};

inline FaultTree FaultTree::validate(std::vector<EventDecl> events, std::vector<GateDecl> gates,
                                     std::string top) {
  FaultTree t;
  const std::size_t n = events.size();
  std::unordered_map<std::string, std::size_t> ids;
  auto declare = [&](const std::string& name, std::size_t id) {
    if (!ids.emplace(name, id).second) {
      throw ValidationError("duplicate declaration of '" + name + "'");
    }
  };
  for (std::size_t i = 0; i < n; ++i) declare(events[i].name, i);
  for (std::size_t g = 0; g < gates.size(); ++g) declare(gates[g].name, n + g);

  auto top_it = ids.find(top);
  if (top.empty()) throw ValidationError("no top node declared");
  if (top_it == ids.end()) throw ValidationError("top node '" + top + "' is not declared");
  t.top_ = top_it->second;

  t.gates_.reserve(gates.size());
  for (const GateDecl& decl : gates) {
    const std::size_t arity = decl.children.size();
    const std::string where = "gate '" + decl.name + "'";
    switch (decl.type.kind) {
      case GateKind::And:
      case GateKind::Or:
      case GateKind::Pand:
      case GateKind::Seq:
        if (arity < 2) {
          throw ValidationError(where + " (" + std::string(gate_keyword(decl.type.kind)) +
                                ") needs at least 2 inputs, has " + std::to_string(arity));
        }
        break;
      case GateKind::Voting:
        if (arity < 1) throw ValidationError(where + " (vote) has no inputs");
        if (decl.type.k < 1 || decl.type.k > arity) {
          throw ValidationError(where + " (vote) threshold k=" + std::to_string(decl.type.k) +
                                " outside [1, " + std::to_string(arity) + "]");
        }
        break;
      case GateKind::Spare:
        if (arity != 2) {
          throw ValidationError(where + " (spare) needs exactly 2 inputs, has " +
                                std::to_string(arity));
        }
        if (!(decl.type.dormancy >= 0.0 && decl.type.dormancy <= 1.0)) {
          throw ValidationError(where + " (spare) dormancy outside [0, 1]");
        }
        break;
    }
    Gate g{decl.name, decl.type, {}};
    g.children.reserve(arity);
    for (const std::string& child : decl.children) {
      auto it = ids.find(child);
      if (it == ids.end()) {
        throw ValidationError(where + " references undeclared node '" + child + "'");
      }
      g.children.push_back(it->second);
    }
    t.gates_.push_back(std::move(g));
  }
  t.events_ = std::move(events);

  // Iterative DFS from TOP: post-order gives children before parents.
  enum class Mark : std::uint8_t { New, Active, Done };
  std::vector<Mark> mark(t.num_nodes(), Mark::New);
  struct Frame {
    std::size_t node;
    std::size_t next_child;
  };
  std::vector<Frame> stack;
  auto visit = [&](std::size_t root) {
    stack.push_back({root, 0});
    mark[root] = Mark::Active;
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (t.is_event(f.node)) {
        mark[f.node] = Mark::Done;
        stack.pop_back();
        continue;
      }
      const Gate& g = t.gate(f.node);
      if (f.next_child == g.children.size()) {
        mark[f.node] = Mark::Done;
        t.order_.push_back(f.node);
        stack.pop_back();
        continue;
      }
      const std::size_t child = g.children[f.next_child++];
      if (mark[child] == Mark::Active) {
        std::string cycle;
        auto start = std::find_if(stack.begin(), stack.end(),
                                  [child](const Frame& fr) { return fr.node == child; });
        for (auto it = start; it != stack.end(); ++it) cycle += t.name(it->node) + " -> ";
        cycle += t.name(child);
        throw ValidationError("cycle detected: " + cycle);
      }
      if (mark[child] == Mark::New) {
        mark[child] = Mark::Active;
        stack.push_back({child, 0});
      }
    }
  };
  visit(t.top_);
  const std::vector<Mark> reached = mark;
  // Cycles outside the TOP cone are reported as cycles, not as unreachable.
  for (std::size_t node = 0; node < t.num_nodes(); ++node) {
    if (mark[node] == Mark::New) visit(node);
  }
  for (std::size_t node = 0; node < t.num_nodes(); ++node) {
    if (reached[node] == Mark::New) {
      throw ValidationError("node '" + t.name(node) + "' is not reachable from top '" +
                            t.name(t.top_) + "'");
    }
  }
  return t;
}

}  // namespace dftmc
