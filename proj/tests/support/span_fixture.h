#ifndef KBVQA_TESTS_SUPPORT_SPAN_FIXTURE_H_
#define KBVQA_TESTS_SUPPORT_SPAN_FIXTURE_H_

#include <filesystem>
#include <string>
#include <vector>

#include "kbvqa/spans.h"

namespace kbvqa::testing {

struct SpanCombo {
  SpanMethod method;
  LinkMode link_mode;
};

// Every (method, link mode) pair that has a golden file.
const std::vector<SpanCombo>& FixtureCombos();

struct SpanFixtureResult {
  std::vector<std::string> failures;  // empty on success
  int combos_checked = 0;
  int records = 0;
};

// Builds every SpanSet over the fixture corpus in `dir` and compares the
// serialization and statistics against dir/golden byte for byte, then checks
// the subset relations between link modes and OKVQA levels.
SpanFixtureResult RunSpanFixture(const std::filesystem::path& dir);

// One "<method>\t<mode>\t%.4f\t%.4f\t%.4f" line.
std::string FormatStatsLine(const SpanCombo& combo, const SpanStats& stats);

// True when every span of `sub` appears in `super` for the same record,
// comparing surface and offsets.
bool SpanSubset(const SpanSet& sub, const SpanSet& super);

}  // namespace kbvqa::testing

#endif  // KBVQA_TESTS_SUPPORT_SPAN_FIXTURE_H_
