#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "paic/pipeline.hpp"

namespace paic {

enum class ReportFormat { text, json, csv, svg_forest };
ReportFormat parse_format(const std::string& token);

std::string render_text(const ComparisonResult& result);
std::string render_csv(const ComparisonResult& result);
std::string to_json_string(const ComparisonResult& result);
ComparisonResult result_from_json(const std::string& json_text);

// Point-and-interval rows for contrasts and absolutes; several results are
// drawn side by side for strategy comparison.
std::string render_svg_forest(const std::vector<ComparisonResult>& results);

void emit_report(const ComparisonResult& result, ReportFormat format,
                 const std::filesystem::path& path);

// Strategy-specific diagnostics as a JSON document: weights histogram + ESS
// for maic, traces + acceptance for gcomp_bayes, pooling statistics for mim.
std::string diagnose_json(const ComparisonResult& result);

}  // namespace paic
