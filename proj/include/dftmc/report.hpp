#pragma once

// Machine-readable (JSON) and human-readable run reports.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "json.hpp"

#include "dftmc/engine.hpp"
#include "dftmc/tree.hpp"

namespace dftmc::report {

using Json = nlohmann::ordered_json;

/// Shortest round-trip text for a double; scientific for |x| < 1e-3,
/// "null" for non-finite values.
inline std::string format_number(double x) {
  if (!std::isfinite(x)) return "null";
  char buf[40];
  const bool small = x != 0.0 && std::abs(x) < 1e-3;
  const auto res = small ? std::to_chars(buf, buf + sizeof buf, x, std::chars_format::scientific)
                         : std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace detail {

inline void write(const Json& j, std::string& out, int depth) {
  const std::string pad(static_cast<std::size_t>(2 * (depth + 1)), ' ');
  const std::string close_pad(static_cast<std::size_t>(2 * depth), ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (const auto& [key, value] : j.items()) {
        if (!first) out += ",\n";
        first = false;
        out += pad + Json(key).dump() + ": ";
        write(value, out, depth + 1);
      }
      out += "\n" + close_pad + "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += pad;
        write(j[i], out, depth + 1);
      }
      out += "\n" + close_pad + "]";
      return;
    }
    case Json::value_t::number_float:
      out += format_number(j.get<double>());
      return;
    default:
      out += j.dump();
      return;
  }
}

}  // namespace detail

/// Pretty-printed JSON using format_number() for every float.
inline std::string dump(const Json& j) {
  std::string out;
  detail::write(j, out, 0);
  out += "\n";
  return out;
}

inline Json number_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

inline Json tree_summary(const FaultTree& tree) {
  Json counts = Json::object();
  for (GateKind k : {GateKind::And, GateKind::Or, GateKind::Voting, GateKind::Pand, GateKind::Seq,
                     GateKind::Spare}) {
    counts[std::string(gate_keyword(k))] = tree.count(k);
  }
  return Json{{"top", tree.name(tree.top())},
              {"basic_events", tree.num_events()},
              {"gates", tree.num_gates()},
              {"gate_counts", counts}};
}

inline std::string summary_line(const FaultTree& tree) {
  return std::to_string(tree.num_events()) + " basic events, " +
         std::to_string(tree.num_gates()) + " gates";
}

/// Classification of a D-search row relative to the AmPos band.
inline std::string_view row_outcome(const SearchIteration& row, const RunConfig& config,
                                    bool last, const Estimate& est) {
  if (last && est.method == Method::Direct) return "direct";
  if (row.ampos < config.ampos_low) return "below";
  if (row.ampos > config.ampos_high) return last ? "accepted" : "above";
  return "accepted";
}

inline Json config_json(const RunConfig& c) {
  return Json{{"mission_time", c.mission_time},
              {"cycles", c.cycles},
              {"prelim_cycles", c.prelim_cycles},
              {"ampos_low", c.ampos_low},
              {"ampos_high", c.ampos_high},
              {"confidence", c.confidence},
              {"seed", c.seed},
              {"method", method_name(c.method)},
              {"max_search_iterations", c.max_search_iterations}};
}

inline Json search_json(const SearchTrace& trace, const RunConfig& config, const Estimate* est) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const SearchIteration& r = trace[i];
    Json row{{"ic", r.ic},
             {"d", r.d},
             {"d_low", r.d_low},
             {"d_high", number_or_null(r.d_high)},
             {"ampos", r.ampos}};
    if (est) {
      row["outcome"] = row_outcome(r, config, i + 1 == trace.size(), *est);
    } else {
      row["outcome"] = r.ampos < config.ampos_low ? "below"
                       : r.ampos > config.ampos_high ? "above" : "accepted";
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Json reference_json(const FaultTree& tree, const ReferenceModel& model) {
  Json events = Json::array();
  for (std::size_t i = 0; i < model.size(); ++i) {
    const ReferenceDistribution& r = model.refs[i];
    events.push_back(Json{{"name", tree.events()[i].name},
                          {"family", family_keyword(r.base.family())},
                          {"base_scale", number_or_null(r.base.family() == Family::Normal &&
                                                                r.base.first() <= 0.0
                                                            ? NAN
                                                            : r.base.scale_parameter())},
                          {"v", number_or_null(r.v)},
                          {"tail_ratio", std::exp(model.log_tail_ratio[i])}});
  }
  return Json{{"d", model.big_d}, {"events", events}};
}

inline Json estimate_json(const Estimate& e) {
  return Json{{"method", method_name(e.method)},
              {"p_hat", e.p_hat},
              {"std_err", e.std_err},
              {"confidence", e.confidence},
              {"z", e.z},
              {"ci_low", e.ci_low},
              {"ci_high", e.ci_high},
              {"hits", e.hits},
              {"cycles", e.cycles}};
}

inline Json notes_json(const Estimate& e) {
  Json notes = Json::array();
  if (e.hits == 0) {
    notes.push_back(e.method == Method::Direct
                        ? "no TOP events observed; use importance sampling"
                        : "no TOP events observed");
  } else if (e.method == Method::Direct && !e.trace.empty()) {
    notes.push_back("first preliminary batch hit TOP at D = 1; importance sampling not required");
  }
  return notes;
}

struct InputInfo final {
  std::string path;
  std::string sha256;
};

/// Full run report. wall_clock_seconds is the only field that is not a
/// deterministic function of (input, configuration).
inline Json run_report(const InputInfo& input, const FaultTree& tree, const RunConfig& config,
                       const Estimate& est, double wall_clock_seconds) {
  Json j;
  j["tool"] = "dftmc";
  j["report_version"] = 1;
  j["input"] = Json{{"path", input.path}, {"sha256", input.sha256}};
  j["tree"] = tree_summary(tree);
  j["config"] = config_json(config);
  j["search"] = search_json(est.trace, config, &est);
  j["reference"] = est.reference ? reference_json(tree, *est.reference) : Json(nullptr);
  j["estimate"] = estimate_json(est);
  j["notes"] = notes_json(est);
  j["wall_clock_seconds"] = wall_clock_seconds;
  return j;
}

}  // namespace dftmc::report
