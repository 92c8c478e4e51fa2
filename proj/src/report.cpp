#include "paylogic/report.hpp"

#include <json.hpp>

#include <sstream>

namespace paylogic {

namespace {

using nlohmann::json;

json config_json(const RunConfig& cfg) {
  json j;
  j["truncate_after"] = cfg.truncate_after;
  j["timeout_fired"] = json::array();
  for (const auto& p : cfg.timeout_fired) j["timeout_fired"].push_back(p);
  return j;
}

json model_json(const Model& m) {
  json j = json::object();
  for (const auto& [name, value] : m) j[name] = rat_to_string(value);
  return j;
}

json verdict_json(const Verdict& v) {
  json j;
  j["property"] = v.property;
  j["status"] = status_name(v.status);
  j["details"] = v.details;
  j["witnesses"] = json::array();
  for (const auto& w : v.witnesses) {
    json wj;
    wj["config"] = config_json(w.config);
    wj["model"] = model_json(w.model);
    wj["note"] = w.note;
    j["witnesses"].push_back(std::move(wj));
  }
  if (v.derivation) {
    j["derivation"] = v.derivation->to_string();
    json fams = json::array();
    for (const auto& f : v.derivation->rule_families()) fams.push_back(f);
    j["rule_families"] = std::move(fams);
  }
  return j;
}

}  // namespace

std::string render_json(const AnalysisReport& report) {
  json j;
  j["schema"] = "paylogic-report/1";
  j["protocol"] = report.protocol;
  j["diagnostics"] = json::array();
  for (const auto& d : report.diagnostics) {
    json dj;
    dj["code"] = d.code;
    dj["step"] = d.step;
    dj["message"] = d.message;
    j["diagnostics"].push_back(std::move(dj));
  }
  j["verdicts"] = json::array();
  for (const auto& v : report.verdicts) j["verdicts"].push_back(verdict_json(v));
  return j.dump(2) + "\n";
}

std::string render_text(const AnalysisReport& report) {
  std::ostringstream os;
  os << "protocol " << report.protocol << "\n";
  if (!report.diagnostics.empty()) {
    os << "validation problems:\n";
    for (const auto& d : report.diagnostics) os << "  " << d.to_string() << "\n";
    return os.str();
  }
  for (const auto& v : report.verdicts) {
    os << "[" << status_name(v.status) << "] " << v.property << "\n";
    for (const auto& d : v.details) os << "  " << d << "\n";
    for (const auto& w : v.witnesses) {
      os << "  witness: " << w.config.to_string() << "\n";
      os << "    " << w.note << "\n";
      if (!w.model.empty()) {
        os << "    delays:";
        for (const auto& [name, value] : w.model)
          os << " " << name << "=" << rat_to_string(value);
        os << "\n";
      }
    }
    if (v.derivation) {
      os << "  derivation:\n";
      std::istringstream lines(v.derivation->to_string());
      std::string line;
      while (std::getline(lines, line)) os << "    " << line << "\n";
    }
  }
  return os.str();
}

}  // namespace paylogic
