#include "kbvqa/report.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace kbvqa {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

using Row = std::vector<std::string>;

const std::vector<std::string>& ExplainerOrder() {
  static const std::vector<std::string> order = {"bmgae", "trf", "random"};
  return order;
}

std::string ExplainerLabel(const std::string& name) {
  if (name == "bmgae") return "BM";
  if (name == "trf") return "TRF";
  std::string upper = name;
  for (char& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return upper;
}

std::vector<std::string> TypeColumns(const ReportBundle& b) {
  std::set<std::string> present;
  for (const auto& m : b.models) {
    for (const auto& [t, s] : m.per_type) present.insert(t);
  }
  std::vector<std::string> cols = CanonicalQuestionTypes();
  for (const auto& t : present) {
    if (std::find(cols.begin(), cols.end(), t) == cols.end()) cols.push_back(t);
  }
  return cols;
}

std::vector<std::string> ExplainerColumns(const ReportBundle& b) {
  std::set<std::string> present;
  for (const auto& m : b.models) {
    for (const auto& [name, s] : m.explanations) present.insert(name);
  }
  // The bi-modal and text-only explainers always get columns.
  present.insert("bmgae");
  present.insert("trf");
  std::vector<std::string> cols;
  for (const auto& name : ExplainerOrder()) {
    if (present.erase(name) > 0) cols.push_back(name);
  }
  for (const auto& name : present) cols.push_back(name);
  return cols;
}

std::string Fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string Percent(double fraction) { return Fixed(100.0 * fraction, 2); }

// ---- markdown ----

void MarkdownTable(std::ostringstream& out, const Row& header,
                   const std::vector<Row>& rows) {
  auto line = [&](const Row& cells) {
    out << '|';
    for (const auto& c : cells) out << ' ' << c << " |";
    out << '\n';
  };
  line(header);
  out << '|';
  for (size_t i = 0; i < header.size(); ++i) out << (i < 2 ? "---|" : "---:|");
  out << '\n';
  for (const auto& r : rows) line(r);
  out << '\n';
}

std::string RenderMarkdown(const ReportBundle& b) {
  std::ostringstream out;
  const auto types = TypeColumns(b);
  const auto explainers = ExplainerColumns(b);

  out << "## Runs\n\n";
  std::vector<Row> rows;
  for (const auto& m : b.models) {
    rows.push_back({m.run.model, m.run.type, m.run.split,
                    std::to_string(m.num_questions), std::to_string(m.run.seed),
                    m.run.model_checksum});
  }
  MarkdownTable(out, {"Model", "Type", "Split", "Questions", "Seed", "Checksum"}, rows);

  out << "## Table 1: accuracy and entity spans\n\n";
  rows.clear();
  for (const auto& m : b.models) {
    Row r = {m.run.model, m.run.type, Percent(m.overall_accuracy)};
    if (m.span_stats) {
      r.push_back(Fixed(m.span_stats->ents_per_q, 2));
      r.push_back(Fixed(m.span_stats->eberts_per_q, 2));
      r.push_back(Fixed(m.span_stats->frac_q_with_eberts, 2));
    } else {
      r.insert(r.end(), {"-", "-", "-"});
    }
    rows.push_back(std::move(r));
  }
  MarkdownTable(out, {"Model", "Type", "Acc", "ents per Q", "eberts per Q", "Qs w/ eberts"},
                rows);

  out << "## Table 2: accuracy over runs\n\n";
  rows.clear();
  for (const auto& s : b.runs) {
    rows.push_back({s.model, s.type, Percent(s.stats.mean),
                    s.stats.single_run ? "-" : Percent(s.stats.std),
                    Percent(s.stats.max), Percent(s.stats.median),
                    std::to_string(s.stats.num_runs)});
  }
  MarkdownTable(out, {"Model", "Type", "Mean", "Std", "Max", "Median", "Runs"}, rows);

  out << "## Table 3: accuracy (top) and mean top-1 logit (bottom) by question type\n\n";
  Row header = {"Model", "Type"};
  header.insert(header.end(), types.begin(), types.end());
  header.push_back("Acc / Conf");
  rows.clear();
  if (!b.models.empty()) {
    const auto& first = b.models.front();
    Row r = {"Percent", "with"};
    for (const auto& t : types) {
      auto it = first.per_type.find(t);
      r.push_back(it == first.per_type.end() ? "0.00" : Percent(it->second.fraction));
    }
    r.push_back("-");
    rows.push_back(std::move(r));
  }
  for (const auto& m : b.models) {
    Row r = {m.run.model, m.run.type};
    for (const auto& t : types) {
      auto it = m.per_type.find(t);
      r.push_back(it == m.per_type.end() ? "-" : Percent(it->second.accuracy));
    }
    r.push_back(Percent(m.overall_accuracy));
    rows.push_back(std::move(r));
  }
  for (const auto& m : b.models) {
    Row r = {m.run.model, m.run.type};
    for (const auto& t : types) {
      auto it = m.per_type.find(t);
      r.push_back(it == m.per_type.end() ? "-" : Fixed(it->second.mean_top1_logit, 2));
    }
    r.push_back(Fixed(m.mean_top1_logit, 2));
    rows.push_back(std::move(r));
  }
  MarkdownTable(out, header, rows);

  out << "## Table 4: accuracy when an injected entity is in the top 5 tokens\n\n";
  header = {"Model", "Type"};
  for (const auto& e : explainers) {
    header.push_back(ExplainerLabel(e) + " Acc");
    header.push_back(ExplainerLabel(e) + " Qs");
  }
  rows.clear();
  for (const auto& m : b.models) {
    Row r = {m.run.model, m.run.type};
    for (const auto& e : explainers) {
      auto it = m.explanations.find(e);
      if (it == m.explanations.end()) {
        r.insert(r.end(), {"-", "-"});
        continue;
      }
      const auto& acc = it->second.accuracy_given_top5;
      r.push_back(acc ? Percent(*acc) : "-");
      r.push_back(Percent(it->second.top5));
    }
    rows.push_back(std::move(r));
  }
  MarkdownTable(out, header, rows);

  out << "## Table 5: injected entity among the top-k explanation tokens\n\n";
  header = {"Model", "Type"};
  for (const auto& e : explainers) {
    for (const char* k : {" top1", " top5", " top10"}) header.push_back(ExplainerLabel(e) + k);
  }
  header.push_back("Qs w/ EBERT");
  rows.clear();
  for (const auto& m : b.models) {
    Row r = {m.run.model, m.run.type};
    for (const auto& e : explainers) {
      auto it = m.explanations.find(e);
      if (it == m.explanations.end()) {
        r.insert(r.end(), {"-", "-", "-"});
        continue;
      }
      r.push_back(Percent(it->second.top1));
      r.push_back(Percent(it->second.top5));
      r.push_back(Percent(it->second.top10));
    }
    r.push_back(m.span_stats ? Fixed(m.span_stats->frac_q_with_eberts, 2) : "-");
    rows.push_back(std::move(r));
  }
  MarkdownTable(out, header, rows);
  return out.str();
}

// ---- csv ----

std::string CsvField(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  if (s.find_first_of("\n\r") != std::string::npos) {
    throw Error("csv field contains a line break");
  }
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void CsvRow(std::ostringstream& out, const Row& cells) {
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) out << ',';
    out << CsvField(cells[i]);
  }
  out << '\n';
}

Row ParseCsvLine(std::string_view line) {
  Row cells;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw Error("unterminated csv quote");
  cells.push_back(std::move(cur));
  return cells;
}

std::string Opt(const std::optional<double>& v) { return v ? FormatDouble(*v) : ""; }

std::string RenderCsv(const ReportBundle& b) {
  std::ostringstream out;
  const auto types = TypeColumns(b);
  const auto explainers = ExplainerColumns(b);

  CsvRow(out, {"table", "model", "type", "split", "num_questions", "seed", "model_checksum"});
  for (const auto& m : b.models) {
    CsvRow(out, {"runs", m.run.model, m.run.type, m.run.split,
                 std::to_string(m.num_questions), std::to_string(m.run.seed),
                 m.run.model_checksum});
  }
  out << '\n';

  CsvRow(out, {"table", "model", "type", "Acc", "ents per Q", "eberts per Q",
               "Qs w/ eberts"});
  for (const auto& m : b.models) {
    const auto& s = m.span_stats;
    CsvRow(out, {"table1", m.run.model, m.run.type, FormatDouble(m.overall_accuracy),
                 s ? FormatDouble(s->ents_per_q) : "",
                 s ? FormatDouble(s->eberts_per_q) : "",
                 s ? FormatDouble(s->frac_q_with_eberts) : ""});
  }
  out << '\n';

  CsvRow(out, {"table", "model", "type", "Mean", "Std", "Max", "Median", "Runs",
               "single_run", "values"});
  for (const auto& s : b.runs) {
    std::string values;
    for (size_t i = 0; i < s.values.size(); ++i) {
      if (i > 0) values += ';';
      values += FormatDouble(s.values[i]);
    }
    CsvRow(out, {"table2", s.model, s.type, FormatDouble(s.stats.mean),
                 FormatDouble(s.stats.std), FormatDouble(s.stats.max),
                 FormatDouble(s.stats.median), std::to_string(s.stats.num_runs),
                 s.stats.single_run ? "1" : "0", values});
  }
  out << '\n';

  Row header = {"table", "model", "type", "row"};
  header.insert(header.end(), types.begin(), types.end());
  header.push_back("Acc / Conf");
  CsvRow(out, header);
  for (const auto& m : b.models) {
    struct Line {
      const char* name;
      std::string (*cell)(const TypeStats&);
      std::string overall;
    };
    const Line lines[] = {
        {"count", [](const TypeStats& t) { return std::to_string(t.count); },
         std::to_string(m.num_questions)},
        {"percent", [](const TypeStats& t) { return FormatDouble(t.fraction); }, ""},
        {"accuracy", [](const TypeStats& t) { return FormatDouble(t.accuracy); },
         FormatDouble(m.overall_accuracy)},
        {"confidence",
         [](const TypeStats& t) { return FormatDouble(t.mean_top1_logit); },
         FormatDouble(m.mean_top1_logit)},
    };
    for (const auto& line : lines) {
      Row r = {"table3", m.run.model, m.run.type, line.name};
      for (const auto& t : types) {
        auto it = m.per_type.find(t);
        r.push_back(it == m.per_type.end() ? "" : line.cell(it->second));
      }
      r.push_back(line.overall);
      CsvRow(out, r);
    }
  }
  out << '\n';

  header = {"table", "model", "type"};
  for (const auto& e : explainers) {
    header.push_back(ExplainerLabel(e) + " Acc");
    header.push_back(ExplainerLabel(e) + " Qs");
  }
  CsvRow(out, header);
  for (const auto& m : b.models) {
    Row r = {"table4", m.run.model, m.run.type};
    for (const auto& e : explainers) {
      auto it = m.explanations.find(e);
      r.push_back(it == m.explanations.end() ? "" : Opt(it->second.accuracy_given_top5));
      r.push_back(it == m.explanations.end() ? "" : FormatDouble(it->second.top5));
    }
    CsvRow(out, r);
  }
  out << '\n';

  header = {"table", "model", "type"};
  for (const auto& e : explainers) {
    for (const char* k : {" top1", " top5", " top10"}) header.push_back(ExplainerLabel(e) + k);
  }
  header.push_back("Qs w/ EBERT");
  CsvRow(out, header);
  for (const auto& m : b.models) {
    Row r = {"table5", m.run.model, m.run.type};
    for (const auto& e : explainers) {
      auto it = m.explanations.find(e);
      const bool has = it != m.explanations.end();
      r.push_back(has ? FormatDouble(it->second.top1) : "");
      r.push_back(has ? FormatDouble(it->second.top5) : "");
      r.push_back(has ? FormatDouble(it->second.top10) : "");
    }
    r.push_back(m.span_stats ? FormatDouble(m.span_stats->frac_q_with_eberts) : "");
    CsvRow(out, r);
  }
  return out.str();
}

double ParseNumber(const std::string& s) {
  size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw Error("bad number '" + s + "' in report csv");
  }
  if (used != s.size()) throw Error("bad number '" + s + "' in report csv");
  return v;
}

struct Section {
  Row header;
  std::vector<Row> rows;

  size_t Column(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error("report csv lacks column '" + name + "'");
    return static_cast<size_t>(it - header.begin());
  }
};

ReportBundle ParseCsv(std::string_view text) {
  std::map<std::string, Section> sections;
  Section current;
  auto flush = [&] {
    if (current.header.empty()) return;
    std::string name;
    for (const auto& r : current.rows) {
      if (r.size() != current.header.size()) throw Error("ragged report csv row");
      name = r[0];
    }
    if (!name.empty()) sections[name] = current;
    current = Section();
  };
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) {
      flush();
      continue;
    }
    Row cells = ParseCsvLine(line);
    if (current.header.empty()) {
      current.header = std::move(cells);
    } else {
      current.rows.push_back(std::move(cells));
    }
  }
  flush();

  ReportBundle b;
  auto section = [&](const char* name) -> const Section* {
    auto it = sections.find(name);
    return it == sections.end() ? nullptr : &it->second;
  };
  if (const Section* s = section("runs")) {
    for (const auto& r : s->rows) {
      EvalReport m;
      m.run.model = r[1];
      m.run.type = r[2];
      m.run.split = r[3];
      m.num_questions = std::stoi(r[4]);
      m.run.seed = std::stoull(r[5]);
      m.run.model_checksum = r[6];
      b.models.push_back(std::move(m));
    }
  }
  auto model_rows = [&](const Section* s, size_t per_model) {
    if (s && s->rows.size() != b.models.size() * per_model) {
      throw Error("report csv sections disagree on the model list");
    }
  };
  if (const Section* s = section("table1")) {
    model_rows(s, 1);
    for (size_t i = 0; i < s->rows.size(); ++i) {
      const Row& r = s->rows[i];
      b.models[i].overall_accuracy = ParseNumber(r[s->Column("Acc")]);
      if (!r[s->Column("ents per Q")].empty()) {
        b.models[i].span_stats = SpanStats{ParseNumber(r[s->Column("ents per Q")]),
                                           ParseNumber(r[s->Column("eberts per Q")]),
                                           ParseNumber(r[s->Column("Qs w/ eberts")])};
      }
    }
  }
  if (const Section* s = section("table2")) {
    for (const auto& r : s->rows) {
      RunSummary sum;
      sum.model = r[1];
      sum.type = r[2];
      sum.stats.mean = ParseNumber(r[s->Column("Mean")]);
      sum.stats.std = ParseNumber(r[s->Column("Std")]);
      sum.stats.max = ParseNumber(r[s->Column("Max")]);
      sum.stats.median = ParseNumber(r[s->Column("Median")]);
      sum.stats.num_runs = std::stoi(r[s->Column("Runs")]);
      sum.stats.single_run = r[s->Column("single_run")] == "1";
      std::istringstream values(r[s->Column("values")]);
      std::string v;
      while (std::getline(values, v, ';')) sum.values.push_back(ParseNumber(v));
      b.runs.push_back(std::move(sum));
    }
  }
  if (const Section* s = section("table3")) {
    model_rows(s, 4);
    const size_t first = s->Column("row") + 1;
    const size_t overall = s->Column("Acc / Conf");
    for (size_t i = 0; i < b.models.size(); ++i) {
      EvalReport& m = b.models[i];
      const Row& count = s->rows[4 * i];
      const Row& percent = s->rows[4 * i + 1];
      const Row& accuracy = s->rows[4 * i + 2];
      const Row& confidence = s->rows[4 * i + 3];
      for (size_t c = first; c < overall; ++c) {
        if (count[c].empty()) continue;
        m.per_type[s->header[c]] = {std::stoi(count[c]), ParseNumber(percent[c]),
                                    ParseNumber(accuracy[c]),
                                    ParseNumber(confidence[c])};
      }
      m.mean_top1_logit = ParseNumber(confidence[overall]);
    }
  }
  const Section* t4 = section("table4");
  const Section* t5 = section("table5");
  model_rows(t4, 1);
  model_rows(t5, 1);
  if (t5) {
    std::vector<std::string> names;
    for (size_t c = 3; c + 1 < t5->header.size(); c += 3) {
      const std::string& col = t5->header[c];
      names.push_back(col.substr(0, col.size() - std::string(" top1").size()));
    }
    for (size_t i = 0; i < b.models.size(); ++i) {
      for (size_t e = 0; e < names.size(); ++e) {
        const Row& r = t5->rows[i];
        if (r[3 + 3 * e].empty()) continue;
        std::string name = names[e];
        for (const auto& candidate : ExplainerOrder()) {
          if (ExplainerLabel(candidate) == names[e]) name = candidate;
        }
        if (name == names[e]) {
          for (char& ch : name) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        }
        ExplanationStats stats{ParseNumber(r[3 + 3 * e]), ParseNumber(r[4 + 3 * e]),
                               ParseNumber(r[5 + 3 * e]), std::nullopt};
        if (t4) {
          const std::string& acc = t4->rows[i][t4->Column(names[e] + " Acc")];
          if (!acc.empty()) stats.accuracy_given_top5 = ParseNumber(acc);
        }
        b.models[i].explanations[name] = stats;
      }
    }
  }
  return b;
}

// ---- json ----

ordered_json BundleToJson(const ReportBundle& b) {
  ordered_json j;
  ordered_json models = ordered_json::array();
  for (const auto& m : b.models) models.push_back(ReportToJson(m));
  j["models"] = std::move(models);
  ordered_json runs = ordered_json::array();
  for (const auto& s : b.runs) {
    ordered_json r;
    r["model"] = s.model;
    r["type"] = s.type;
    r["values"] = s.values;
    r["mean"] = s.stats.mean;
    r["std"] = s.stats.std;
    r["max"] = s.stats.max;
    r["median"] = s.stats.median;
    r["num_runs"] = s.stats.num_runs;
    r["single_run"] = s.stats.single_run;
    runs.push_back(std::move(r));
  }
  j["runs"] = std::move(runs);
  return j;
}

}  // namespace

const std::vector<std::string>& CanonicalQuestionTypes() {
  static const std::vector<std::string> types = {
      "1-hop", "multi-hop", "multi-rel", "bool",  "multi-entity",
      "cmp",   "spatial",   "subtr",     "count", "inter"};
  return types;
}

RunSummary SummarizeRuns(std::string model, std::string type,
                         std::vector<double> values) {
  RunSummary s;
  s.stats = AggregateValues(values);
  s.model = std::move(model);
  s.type = std::move(type);
  s.values = std::move(values);
  return s;
}

const char* ReportFormatName(ReportFormat format) {
  switch (format) {
    case ReportFormat::kMarkdown:
      return "md";
    case ReportFormat::kCsv:
      return "csv";
    case ReportFormat::kJson:
      return "json";
  }
  return "?";
}

ReportFormat ParseReportFormat(std::string_view name) {
  if (name == "md" || name == "markdown") return ReportFormat::kMarkdown;
  if (name == "csv") return ReportFormat::kCsv;
  if (name == "json") return ReportFormat::kJson;
  throw Error("unknown report format '" + std::string(name) + "'");
}

std::string RenderReport(const ReportBundle& bundle, ReportFormat format) {
  switch (format) {
    case ReportFormat::kMarkdown:
      return RenderMarkdown(bundle);
    case ReportFormat::kCsv:
      return RenderCsv(bundle);
    case ReportFormat::kJson:
      return BundleToJson(bundle).dump(2) + "\n";
  }
  throw Error("unknown report format");
}

ReportBundle ParseReportJson(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("malformed report json: ") + e.what());
  }
  ReportBundle b;
  for (const auto& m : j.at("models")) b.models.push_back(ReportFromJson(m));
  for (const auto& r : j.at("runs")) {
    RunSummary s;
    s.model = r.at("model").get<std::string>();
    s.type = r.at("type").get<std::string>();
    s.values = r.at("values").get<std::vector<double>>();
    s.stats.mean = r.at("mean").get<double>();
    s.stats.std = r.at("std").get<double>();
    s.stats.max = r.at("max").get<double>();
    s.stats.median = r.at("median").get<double>();
    s.stats.num_runs = r.at("num_runs").get<int>();
    s.stats.single_run = r.at("single_run").get<bool>();
    b.runs.push_back(std::move(s));
  }
  return b;
}

ReportBundle ParseReportCsv(std::string_view text) { return ParseCsv(text); }

std::filesystem::path EmitReport(const ReportBundle& bundle, ReportFormat format,
                                 const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const auto path = dir / (std::string("report.") + ReportFormatName(format));
  const std::string text = RenderReport(bundle, format);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  out.close();
  if (!out) throw Error("write failed for " + path.string());
  return path;
}

}  // namespace kbvqa
