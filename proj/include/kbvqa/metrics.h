#ifndef KBVQA_METRICS_H_
#define KBVQA_METRICS_H_

#include <limits>
#include <string_view>
#include <vector>

#include "kbvqa/spans.h"

namespace kbvqa {

enum class ScoreMode { kExact, kSoft };
const char* ScoreModeName(ScoreMode mode);  // "exact", "soft"
ScoreMode ParseScoreMode(std::string_view name);

// EXACT: 1 when the prediction equals any answer text, else 0.
// SOFT: min(10 * (summed weight of matching answers) / 3, 1), reading each
// weight as an annotator count over 10.
// Texts are compared after NormalizeAnswer unless `normalize` is false.
// Throws on an empty answer list.
double ScoreAnswer(std::string_view prediction, const std::vector<Answer>& answers,
                   ScoreMode mode, bool normalize = true);

// Outcome of one question under both models.
struct GateCase {
  double baseline_score = 0;  // credit of the baseline top-1 answer
  double injected_score = 0;  // credit of the injected top-1 answer
  double injected_logit = 0;  // raw top-1 logit of the injected model
};

struct GateResult {
  // The injected answer is used iff its logit > threshold; -inf means always.
  double threshold = -std::numeric_limits<double>::infinity();
  double holdout_accuracy = 0;
  double holdout_baseline_accuracy = 0;
  double holdout_injected_accuracy = 0;
  double test_accuracy = 0;
  std::vector<bool> test_uses_injected;
};

double GatedAccuracy(const std::vector<GateCase>& cases, double threshold);

// Picks the threshold maximizing holdout accuracy among -inf and every
// holdout injected logit (ties go to the lowest threshold), then applies it
// to `test`. Throws on an empty holdout.
GateResult ConfidenceGatedInjection(const std::vector<GateCase>& holdout,
                                    const std::vector<GateCase>& test);

struct RunStats {
  double mean = 0;
  double std = 0;  // sample (n - 1); 0 for a single run
  double max = 0;
  double median = 0;
  int num_runs = 0;
  bool single_run = false;  // std is undefined and reported as 0

  bool operator==(const RunStats&) const = default;
};

// Throws on an empty list.
RunStats AggregateValues(const std::vector<double>& values);

}  // namespace kbvqa

#endif  // KBVQA_METRICS_H_
