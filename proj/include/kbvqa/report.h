#ifndef KBVQA_REPORT_H_
#define KBVQA_REPORT_H_

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "kbvqa/evaluate.h"

namespace kbvqa {

// Question-type columns, in table order. Other types follow, sorted.
const std::vector<std::string>& CanonicalQuestionTypes();

// Accuracy of one configuration over several seeds or splits.
struct RunSummary {
  std::string model;
  std::string type;
  std::vector<double> values;
  RunStats stats;

  bool operator==(const RunSummary&) const = default;
};

RunSummary SummarizeRuns(std::string model, std::string type,
                         std::vector<double> values);

struct ReportBundle {
  std::vector<EvalReport> models;  // one table row each
  std::vector<RunSummary> runs;

  bool operator==(const ReportBundle&) const = default;
};

enum class ReportFormat { kMarkdown, kCsv, kJson };
const char* ReportFormatName(ReportFormat format);  // "md", "csv", "json"
ReportFormat ParseReportFormat(std::string_view name);

// Tables: overall accuracy with span statistics; multi-run statistics;
// accuracy and mean top-1 logit by question type; accuracy when an injected
// entity is in the explainer's top 5; entity top-1/5/10 rates. Markdown
// prints percentages; csv and json carry the exact fractions.
std::string RenderReport(const ReportBundle& bundle, ReportFormat format);

ReportBundle ParseReportJson(std::string_view text);
// Inverse of the csv rendering.
ReportBundle ParseReportCsv(std::string_view text);

// Writes dir/report.<ext> and returns its path. Throws when unwritable.
std::filesystem::path EmitReport(const ReportBundle& bundle, ReportFormat format,
                                 const std::filesystem::path& dir);

}  // namespace kbvqa

#endif  // KBVQA_REPORT_H_
