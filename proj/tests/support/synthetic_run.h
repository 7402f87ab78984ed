#ifndef KBVQA_TESTS_SUPPORT_SYNTHETIC_RUN_H_
#define KBVQA_TESTS_SUPPORT_SYNTHETIC_RUN_H_

#include <vector>

#include "kbvqa/pipeline.h"
#include "kbvqa/synthetic.h"

namespace kbvqa::testing {

// An in-memory synthetic benchmark with the run settings `kbvqa synth`
// writes next to it. Resources carry a fitted alignment.
struct SyntheticSetup {
  SyntheticBenchmark bench;
  Resources res;
  RunConfig config;
};

SyntheticSetup MakeSyntheticSetup(const SyntheticConfig& synthetic);

// A smaller benchmark for unit tests.
SyntheticConfig SmallSyntheticConfig(uint64_t seed);

struct PairedRun {
  TrainedModel injected;
  TrainedModel baseline;
  PipelineResult injected_result;
  PipelineResult baseline_result;
};

// Trains and evaluates META/as_is injection and the no-injection baseline.
PairedRun RunPaired(const SyntheticSetup& setup);

// Injected test-split examples for a trained model.
std::vector<Example> InjectedEvalExamples(const SyntheticSetup& setup,
                                          const TrainedModel& trained);

// Cases pairing the baseline and injected predictions of one split.
std::vector<GateCase> HoldoutCases(const PairedRun& run);
std::vector<GateCase> TestCases(const PairedRun& run);

}  // namespace kbvqa::testing

#endif  // KBVQA_TESTS_SUPPORT_SYNTHETIC_RUN_H_
