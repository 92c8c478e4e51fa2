// Deterministic report rendering: a canonical JSON document (stable key
// order, rationals as exact strings) and a human-readable text form.

#ifndef PAYLOGIC_REPORT_HPP
#define PAYLOGIC_REPORT_HPP

#include "paylogic/analysis.hpp"

#include <string>

namespace paylogic {

// Schema "paylogic-report/1". Byte-identical across runs on the same input.
std::string render_json(const AnalysisReport& report);

std::string render_text(const AnalysisReport& report);

}  // namespace paylogic

#endif
