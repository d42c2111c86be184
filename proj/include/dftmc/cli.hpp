#pragma once

// Subcommands behind the `dftmc` executable. Each returns the process exit
// code and writes to the given streams, so they can be driven in-process.
//
// Exit codes:
//   0  success
//   1  I/O error (file missing or unreadable)
//   2  parse error (input file or command line)
//   3  validation error (tree structure or run configuration)
//   4  engine error (D-search failure, solver or model error)
//   5  tree shape not supported by the requested oracle

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include <openssl/evp.h>

#include "dftmc/engine.hpp"
#include "dftmc/error.hpp"
#include "dftmc/oracle.hpp"
#include "dftmc/parser.hpp"
#include "dftmc/report.hpp"
#include "dftmc/tree.hpp"

namespace dftmc::cli {

enum ExitCode : int {
  kOk = 0,
  kIoError = 1,
  kParseError = 2,
  kValidationError = 3,
  kEngineError = 4,
  kUnsupported = 5,
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading '" + path + "'");
  return ss.str();
}

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 digest failed");
  }
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", digest[i]);
    hex += byte;
  }
  return hex;
}

struct RunOptions final {
  std::optional<double> mission_time;
  std::uint64_t cycles = 100000;
  std::uint64_t prelim_cycles = 1000;
  std::uint64_t ampos_low = 10;
  std::uint64_t ampos_high = 100;
  double confidence = 0.999;
  std::uint64_t seed = 0;
  unsigned max_search_iterations = 30;
  Method method = Method::Auto;
  unsigned threads = 1;
  bool json = false;
};

struct OracleOptions final {
  std::optional<double> mission_time;
  /// Empty for exact static enumeration; "pand-overlap" for the
  /// small-p PAND overlap approximation.
  std::string family;
  /// When positive, also run plain Monte Carlo with this many cycles.
  std::uint64_t direct_cycles = 0;
  std::uint64_t seed = 1;
  bool json = false;
};

namespace detail {

struct Loaded {
  std::string text;
  TreeDocument doc;
  FaultTree tree;
};

inline Loaded load(const std::string& path) {
  std::string text = read_file(path);
  TreeDocument doc = parse(text);
  FaultTree tree = doc.to_tree();
  return {std::move(text), std::move(doc), std::move(tree)};
}

// Runs `body`, mapping library exceptions to exit codes.
template <typename Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kParseError;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << "\n";
    return kValidationError;
  } catch (const UnsupportedError& e) {
    err << "unsupported: " << e.what() << "\n";
    return kUnsupported;
  } catch (const SearchError& e) {
    err << "search failed: " << e.what() << "\n";
    for (const SearchIteration& r : e.trace()) {
      err << "  IC=" << r.ic << " D=" << report::format_number(r.d)
          << " D_Dn=" << report::format_number(r.d_low) << " D_Up="
          << (std::isinf(r.d_high) ? std::string("Inf") : report::format_number(r.d_high))
          << " AmPos=" << r.ampos << "\n";
    }
    return kEngineError;
  } catch (const Error& e) {
    err << "engine error: " << e.what() << "\n";
    return kEngineError;
  }
}

inline std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

inline std::string gate_breakdown(const FaultTree& tree) {
  std::string out;
  for (GateKind k : {GateKind::And, GateKind::Or, GateKind::Voting, GateKind::Pand, GateKind::Seq,
                     GateKind::Spare}) {
    if (const std::size_t n = tree.count(k)) {
      if (!out.empty()) out += ", ";
      out += std::string(gate_keyword(k)) + " " + std::to_string(n);
    }
  }
  return out.empty() ? "none" : out;
}

inline void write_search_table(std::ostream& out, const RunConfig& config, const Estimate& est) {
  using report::format_number;
  out << "D search (" << config.prelim_cycles << " cycles per iteration)\n";
  out << pad("INPUT", 52) << "OUTPUT\n";
  out << pad("IC", 6) << pad("D_Dn", 14) << pad("D_Up", 14) << pad("D", 18) << "AmPos\n";
  for (std::size_t i = 0; i < est.trace.size(); ++i) {
    const SearchIteration& r = est.trace[i];
    const bool last = i + 1 == est.trace.size();
    const std::string outcome(report::row_outcome(r, config, last, est));
    std::string d = format_number(r.d);
    if (outcome == "accepted") d += " - final";
    std::string ampos = std::to_string(r.ampos);
    if (outcome == "direct") {
      ampos += " (> 0 at D = 1: direct simulation)";
    } else if (r.ampos < config.ampos_low) {
      ampos += " (< AmPos_Dn)";
    } else if (r.ampos > config.ampos_high) {
      ampos += " (> AmPos_Up)";
    } else {
      ampos += " (>= AmPos_Dn & <= AmPos_Up)";
    }
    out << pad(std::to_string(r.ic), 6) << pad(format_number(r.d_low), 14)
        << pad(std::isinf(r.d_high) ? "Inf" : format_number(r.d_high), 14) << pad(d, 18)
        << ampos << "\n";
  }
}

inline void write_text_report(std::ostream& out, const std::string& path, const report::InputInfo& input,
                              const FaultTree& tree, const RunConfig& config, const Estimate& est,
                              double seconds) {
  using report::format_number;
  out << "input: " << path << " (sha256 " << input.sha256 << ")\n";
  out << "tree: " << report::summary_line(tree) << " (" << gate_breakdown(tree) << "), top "
      << tree.name(tree.top()) << "\n";
  out << "mission time " << format_number(config.mission_time) << ", cycles " << config.cycles
      << ", seed " << config.seed << ", method " << method_name(config.method) << "\n\n";
  if (!est.trace.empty()) {
    write_search_table(out, config, est);
    out << "\n";
  }
  if (est.reference) {
    const ReferenceModel& m = *est.reference;
    out << "reference scales (D = " << format_number(m.big_d) << ")\n";
    out << pad("event", 16) << pad("family", 11) << pad("scale", 26) << "v\n";
    for (std::size_t i = 0; i < m.size(); ++i) {
      const ReferenceDistribution& r = m.refs[i];
      const bool scalable = r.base.family() != Family::Normal || r.base.first() > 0.0;
      out << pad(tree.events()[i].name, 16) << pad(std::string(family_keyword(r.base.family())), 11)
          << pad(scalable ? format_number(r.base.scale_parameter()) : "n/a", 26)
          << format_number(r.v) << "\n";
    }
    out << "\n";
  }
  out << "method: " << method_name(est.method) << "\n";
  out << "P(TOP) = " << format_number(est.p_hat) << "\n";
  out << "STD = " << format_number(est.std_err) << "\n";
  out << "CI = [" << format_number(est.ci_low) << ", " << format_number(est.ci_high)
      << "] at confidence level " << format_number(est.confidence) << " (z = "
      << format_number(est.z) << ")\n";
  out << "hits: " << est.hits << " of " << est.cycles << " cycles\n";
  for (const auto& note : report::notes_json(est)) out << "note: " << note.get<std::string>() << "\n";
  out << "wall clock: " << format_number(seconds) << " s\n";
}

}  // namespace detail

/// Parses and validates a tree file and prints its summary.
inline int cmd_check(const std::string& path, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    const detail::Loaded in = detail::load(path);
    out << "ok: " << report::summary_line(in.tree) << " (" << detail::gate_breakdown(in.tree)
        << "), top " << in.tree.name(in.tree.top());
    if (in.doc.mission_time) out << ", mission time " << report::format_number(*in.doc.mission_time);
    out << "\n";
    return kOk;
  });
}

/// Estimates P{TOP fails before T} and writes a text or JSON report.
inline int cmd_run(const std::string& path, const RunOptions& opt, std::ostream& out,
                   std::ostream& err) {
  return detail::guarded(err, [&] {
    const auto start = std::chrono::steady_clock::now();
    const detail::Loaded in = detail::load(path);

    RunConfig config;
    if (opt.mission_time) {
      config.mission_time = *opt.mission_time;
    } else if (in.doc.mission_time) {
      config.mission_time = *in.doc.mission_time;
    } else {
      throw ValidationError("no mission time: add 'mission_time' to the file or pass --mission-time");
    }
    config.cycles = opt.cycles;
    config.prelim_cycles = opt.prelim_cycles;
    config.ampos_low = opt.ampos_low;
    config.ampos_high = opt.ampos_high;
    config.confidence = opt.confidence;
    config.seed = opt.seed;
    config.max_search_iterations = opt.max_search_iterations;
    config.method = opt.method;
    config.threads = opt.threads;
    config.validate();

    const Estimate est = estimate_top(in.tree, config);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const report::InputInfo input{path, sha256_hex(in.text)};
    if (opt.json) {
      out << report::dump(report::run_report(input, in.tree, config, est, seconds));
    } else {
      detail::write_text_report(out, path, input, in.tree, config, est, seconds);
    }
    return kOk;
  });
}

namespace detail {

// MTTFs u1..u4 if the tree is (e1 and e2 and e3) PAND (e2 and e3 and e4)
// over exponential events, up to the order of children inside each AND.
inline std::optional<std::array<double, 4>> match_pand_overlap(const FaultTree& tree) {
  if (tree.is_event(tree.top())) return std::nullopt;
  const auto& top = tree.gate(tree.top());
  if (top.type.kind != GateKind::Pand || top.children.size() != 2) return std::nullopt;
  std::array<std::vector<std::size_t>, 2> sides;
  for (int s = 0; s < 2; ++s) {
    const std::size_t node = top.children[s];
    if (tree.is_event(node)) return std::nullopt;
    const auto& g = tree.gate(node);
    if (g.type.kind != GateKind::And || g.children.size() != 3) return std::nullopt;
    for (std::size_t c : g.children) {
      if (!tree.is_event(c) || tree.events()[c].law.family() != Family::Exponential) {
        return std::nullopt;
      }
    }
    sides[s] = g.children;
    std::sort(sides[s].begin(), sides[s].end());
  }
  std::vector<std::size_t> shared;
  std::set_intersection(sides[0].begin(), sides[0].end(), sides[1].begin(), sides[1].end(),
                        std::back_inserter(shared));
  if (shared.size() != 2 || tree.num_events() != 4) return std::nullopt;
  std::size_t first_only = 0;
  std::size_t second_only = 0;
  for (std::size_t e : sides[0]) {
    if (!std::binary_search(shared.begin(), shared.end(), e)) first_only = e;
  }
  for (std::size_t e : sides[1]) {
    if (!std::binary_search(shared.begin(), shared.end(), e)) second_only = e;
  }
  auto u = [&](std::size_t e) { return tree.events()[e].law.first(); };
  return std::array<double, 4>{u(first_only), u(shared[0]), u(shared[1]), u(second_only)};
}

}  // namespace detail

/// Exact (static trees) or closed-form approximate (PAND overlap family)
/// TOP probability.
inline int cmd_oracle(const std::string& path, const OracleOptions& opt, std::ostream& out,
                      std::ostream& err) {
  return detail::guarded(err, [&] {
    const detail::Loaded in = detail::load(path);
    double horizon = 0.0;
    if (opt.mission_time) {
      horizon = *opt.mission_time;
    } else if (in.doc.mission_time) {
      horizon = *in.doc.mission_time;
    } else {
      throw ValidationError("no mission time: add 'mission_time' to the file or pass --mission-time");
    }
    if (!(horizon > 0.0)) throw ValidationError("mission time must be positive");

    report::Json j;
    j["tool"] = "dftmc";
    j["input"] = report::Json{{"path", path}, {"sha256", sha256_hex(in.text)}};
    j["mission_time"] = horizon;
    if (opt.family.empty()) {
      if (!in.tree.is_static()) {
        throw UnsupportedError(
            "tree has dynamic gates; exact enumeration needs a static tree "
            "(use --family pand-overlap for the PAND overlap family)");
      }
      const oracle::ExactStaticResult r = oracle::exact_static(in.tree, horizon);
      j["method"] = "exact_static";
      j["probability"] = r.probability;
      j["term_count"] = r.term_count;
    } else if (opt.family == "pand-overlap") {
      const auto mttf = detail::match_pand_overlap(in.tree);
      if (!mttf) {
        throw UnsupportedError(
            "tree is not of the form (e1 and e2 and e3) pand (e2 and e3 and e4) "
            "with exponential events");
      }
      j["method"] = "smallp_pand_overlap";
      j["probability"] = oracle::smallp_pand_overlap(horizon, *mttf);
    } else {
      throw UnsupportedError("unknown oracle family '" + opt.family + "'");
    }
    if (opt.direct_cycles > 0) {
      const oracle::DirectResult d =
          oracle::direct_rich(in.tree, horizon, opt.direct_cycles, opt.seed);
      j["direct"] = report::Json{{"cycles", opt.direct_cycles},
                                 {"hits", d.hits},
                                 {"p_hat", d.p_hat},
                                 {"std_err", d.std_err}};
    }

    if (opt.json) {
      out << report::dump(j);
    } else {
      using report::format_number;
      out << "method: " << j["method"].get<std::string>() << "\n";
      out << "P(TOP) = " << format_number(j["probability"].get<double>()) << "\n";
      if (j.contains("term_count")) {
        out << "states enumerated: " << j["term_count"].get<std::uint64_t>() << "\n";
      }
      if (j.contains("direct")) {
        const auto& d = j["direct"];
        out << "direct MC: " << format_number(d["p_hat"].get<double>()) << " +- "
            << format_number(d["std_err"].get<double>()) << " (" << d["hits"].get<std::uint64_t>()
            << " hits in " << opt.direct_cycles << " cycles)\n";
      }
    }
    return kOk;
  });
}

}  // namespace dftmc::cli
