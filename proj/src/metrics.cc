#include "kbvqa/metrics.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "kbvqa/text.h"

namespace kbvqa {

const char* ScoreModeName(ScoreMode mode) {
  return mode == ScoreMode::kExact ? "exact" : "soft";
}

ScoreMode ParseScoreMode(std::string_view name) {
  if (name == "exact") return ScoreMode::kExact;
  if (name == "soft") return ScoreMode::kSoft;
  throw Error("unknown score mode '" + std::string(name) + "'");
}

double ScoreAnswer(std::string_view prediction, const std::vector<Answer>& answers,
                   ScoreMode mode, bool normalize) {
  if (answers.empty()) throw Error("no gold answers");
  const std::string pred =
      normalize ? NormalizeAnswer(prediction) : std::string(prediction);
  double matched = 0;
  for (const auto& a : answers) {
    const std::string gold = normalize ? NormalizeAnswer(a.text) : a.text;
    if (gold != pred) continue;
    if (mode == ScoreMode::kExact) return 1.0;
    matched += a.weight;
  }
  if (mode == ScoreMode::kExact) return 0.0;
  return std::min(matched * 10.0 / 3.0, 1.0);
}

double GatedAccuracy(const std::vector<GateCase>& cases, double threshold) {
  if (cases.empty()) throw Error("no gating cases");
  double total = 0;
  for (const auto& c : cases) {
    total += c.injected_logit > threshold ? c.injected_score : c.baseline_score;
  }
  return total / static_cast<double>(cases.size());
}

GateResult ConfidenceGatedInjection(const std::vector<GateCase>& holdout,
                                    const std::vector<GateCase>& test) {
  if (holdout.empty()) throw Error("empty holdout set");
  std::vector<double> candidates{-std::numeric_limits<double>::infinity()};
  for (const auto& c : holdout) candidates.push_back(c.injected_logit);
  std::sort(candidates.begin(), candidates.end());

  GateResult result;
  result.holdout_accuracy = -1;
  for (double t : candidates) {
    const double acc = GatedAccuracy(holdout, t);
    if (acc > result.holdout_accuracy) {
      result.holdout_accuracy = acc;
      result.threshold = t;
    }
  }
  const double inf = std::numeric_limits<double>::infinity();
  result.holdout_injected_accuracy = GatedAccuracy(holdout, -inf);
  result.holdout_baseline_accuracy = GatedAccuracy(holdout, inf);
  for (const auto& c : test) {
    result.test_uses_injected.push_back(c.injected_logit > result.threshold);
  }
  result.test_accuracy = test.empty() ? 0.0 : GatedAccuracy(test, result.threshold);
  return result;
}

RunStats AggregateValues(const std::vector<double>& values) {
  if (values.empty()) throw Error("no runs to aggregate");
  RunStats s;
  const double n = static_cast<double>(values.size());
  s.num_runs = static_cast<int>(values.size());
  s.single_run = values.size() == 1;
  double sum = 0;
  for (double v : values) sum += v;
  s.mean = sum / n;
  if (!s.single_run) {
    double sq = 0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(sq / (n - 1));
  }
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  s.max = sorted.back();
  const size_t mid = sorted.size() / 2;
  s.median = sorted.size() % 2 == 1 ? sorted[mid]
                                    : (sorted[mid - 1] + sorted[mid]) / 2.0;
  return s;
}

}  // namespace kbvqa
