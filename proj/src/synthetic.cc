#include "kbvqa/synthetic.h"

#include <array>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "kbvqa/injector.h"

namespace kbvqa {
namespace {

constexpr std::array<const char*, 16> kClassNames = {
    "amber", "birch", "cedar", "dune", "ember", "fern", "granite", "harbor",
    "iris", "juniper", "kelp", "lotus", "maple", "nectar", "onyx", "pine"};
constexpr std::array<const char*, 16> kKeywords = {
    "north", "south", "east", "west", "spring", "summer", "autumn", "winter",
    "river", "mountain", "forest", "desert", "ocean", "island", "valley", "meadow"};
// No wordpiece in the generated vocabulary is a prefix of these, so alias
// words segment to [UNK].
constexpr std::array<const char*, 20> kSyllables = {
    "zor", "vak", "quel", "min", "thra", "xil", "drum", "pex", "yor", "gath",
    "bly", "kesh", "vor", "zan", "ulm", "trix", "qua", "mox", "jev", "syl"};
constexpr std::array<const char*, 12> kTemplateWords = {
    "who", "is", "in", "the", "picture", "of", "what", "answer", "for", "?",
    "a", "photo"};

Vector Gaussian(int dim, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v[i] = normal(rng);
  return v;
}

std::string Capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

std::string MakeAliasWord(std::mt19937_64& rng) {
  std::uniform_int_distribution<size_t> pick(0, kSyllables.size() - 1);
  return Capitalize(std::string(kSyllables[pick(rng)]) + kSyllables[pick(rng)]);
}

}  // namespace

void SyntheticConfig::Validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw Error(std::string("synthetic ") + name + " must be >= 1");
  };
  positive(num_entities, "num_entities");
  positive(num_questions, "num_questions");
  positive(entity_dim, "entity_dim");
  positive(wordpiece_dim, "wordpiece_dim");
  positive(num_regions, "num_regions");
  positive(region_feat_dim, "region_feat_dim");
  if (num_classes < 2 || num_classes > static_cast<int>(kClassNames.size())) {
    throw Error("synthetic num_classes must be in [2, 16]");
  }
  if (num_shared_words < entity_dim) {
    throw Error("synthetic num_shared_words must be >= entity_dim");
  }
  for (double f : {control_fraction, holdout_fraction, test_fraction}) {
    if (!(f >= 0 && f <= 1)) throw Error("synthetic fractions must be in [0, 1]");
  }
  if (holdout_fraction + test_fraction > 1) {
    throw Error("synthetic holdout + test fractions exceed 1");
  }
  if (class_spread < 0 || alignment_noise < 0) {
    throw Error("synthetic noise levels must be >= 0");
  }
}

nlohmann::json SyntheticConfig::ToJson() const {
  return {{"num_entities", num_entities},
          {"num_questions", num_questions},
          {"num_classes", num_classes},
          {"entity_dim", entity_dim},
          {"wordpiece_dim", wordpiece_dim},
          {"num_shared_words", num_shared_words},
          {"control_fraction", control_fraction},
          {"holdout_fraction", holdout_fraction},
          {"test_fraction", test_fraction},
          {"class_spread", class_spread},
          {"alignment_noise", alignment_noise},
          {"num_regions", num_regions},
          {"region_feat_dim", region_feat_dim},
          {"seed", seed}};
}

SyntheticConfig SyntheticConfig::FromJson(const nlohmann::json& j) {
  SyntheticConfig c;
  c.num_entities = j.value("num_entities", c.num_entities);
  c.num_questions = j.value("num_questions", c.num_questions);
  c.num_classes = j.value("num_classes", c.num_classes);
  c.entity_dim = j.value("entity_dim", c.entity_dim);
  c.wordpiece_dim = j.value("wordpiece_dim", c.wordpiece_dim);
  c.num_shared_words = j.value("num_shared_words", c.num_shared_words);
  c.control_fraction = j.value("control_fraction", c.control_fraction);
  c.holdout_fraction = j.value("holdout_fraction", c.holdout_fraction);
  c.test_fraction = j.value("test_fraction", c.test_fraction);
  c.class_spread = j.value("class_spread", c.class_spread);
  c.alignment_noise = j.value("alignment_noise", c.alignment_noise);
  c.num_regions = j.value("num_regions", c.num_regions);
  c.region_feat_dim = j.value("region_feat_dim", c.region_feat_dim);
  c.seed = j.value("seed", c.seed);
  return c;
}

SyntheticBenchmark GenerateSyntheticDataset(const SyntheticConfig& config) {
  config.Validate();
  std::mt19937_64 rng(config.seed);
  SyntheticBenchmark bench;
  bench.config = config;
  bench.wiki = EmbeddingTable(config.entity_dim, true);
  bench.wordpieces = EmbeddingTable(config.wordpiece_dim, false);
  bench.regions = RegionStore(config.region_feat_dim);
  const int classes = config.num_classes;
  for (int k = 0; k < classes; ++k) {
    bench.class_names.push_back(kClassNames[k]);
    bench.keyword_class[kKeywords[k]] = k;
  }

  // Ground-truth map from the wiki word space into the wordpiece space.
  Matrix truth(config.wordpiece_dim, config.entity_dim);
  for (int r = 0; r < truth.rows(); ++r) {
    truth.row(r) = Gaussian(config.entity_dim,
                            1.0 / std::sqrt(config.entity_dim), rng).transpose();
  }
  for (int w = 0; w < config.num_shared_words; ++w) {
    const std::string word = "word" + std::to_string(w);
    Vector x = Gaussian(config.entity_dim, 1.0, rng);
    Vector y = truth * x + Gaussian(config.wordpiece_dim, config.alignment_noise, rng);
    bench.wiki.Add(Namespace::kWord, word, x);
    bench.wordpieces.Add(Namespace::kWordpiece, word, y);
  }
  for (std::string_view special : {kStartToken, kEndToken, kUnknownToken}) {
    bench.wordpieces.Add(Namespace::kWordpiece, std::string(special),
                         Gaussian(config.wordpiece_dim, 1.0, rng));
  }
  bench.wordpieces.Add(Namespace::kWordpiece, std::string(kSeparatorText),
                       Gaussian(config.wordpiece_dim, 1.0, rng));
  for (const char* w : kTemplateWords) {
    bench.wordpieces.Add(Namespace::kWordpiece, w,
                         Gaussian(config.wordpiece_dim, 1.0, rng));
  }
  for (int k = 0; k < classes; ++k) {
    bench.wordpieces.Add(Namespace::kWordpiece, kKeywords[k],
                         Gaussian(config.wordpiece_dim, 1.0, rng));
  }

  std::vector<Vector> centroids;
  for (int k = 0; k < classes; ++k) {
    centroids.push_back(Gaussian(config.entity_dim, 1.0, rng));
  }
  std::vector<std::string> titles;
  std::set<std::string> used;
  for (int e = 0; e < config.num_entities; ++e) {
    std::string title;
    do {
      title = MakeAliasWord(rng) + " " + MakeAliasWord(rng);
    } while (!used.insert(title).second);
    const int k = e % classes;
    bench.wiki.Add(Namespace::kEntity, title,
                   centroids[k] + Gaussian(config.entity_dim, config.class_spread, rng));
    bench.entity_class[title] = k;
    titles.push_back(std::move(title));
  }

  const int n = config.num_questions;
  const int n_test = static_cast<int>(std::lround(config.test_fraction * n));
  const int n_holdout = static_cast<int>(std::lround(config.holdout_fraction * n));
  const int n_train = n - n_test - n_holdout;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> pick_entity(0, config.num_entities - 1);
  std::uniform_int_distribution<int> pick_class(0, classes - 1);
  const int width = static_cast<int>(std::to_string(n).size());
  for (int q = 0; q < n; ++q) {
    QuestionRecord r;
    std::ostringstream id;
    id << "syn" << std::string(width - std::to_string(q).size(), '0') << q;
    r.id = id.str();
    r.image_ref = "img" + r.id.substr(3);
    r.split = q < n_train ? "train" : (q < n_train + n_holdout ? "holdout" : "test");
    if (unit(rng) < config.control_fraction) {
      const int k = pick_class(rng);
      r.question = std::string("what is the answer for ") + kKeywords[k] + "?";
      r.answers.push_back({bench.class_names[k], 1.0});
      r.question_types = {std::string(kControlType)};
    } else {
      const std::string& title = titles[pick_entity(rng)];
      r.question = "who is in the picture of " + title + "?";
      r.answers.push_back({bench.class_names[bench.entity_class[title]], 1.0});
      r.question_types = {"1-hop"};
      if (unit(rng) < 0.5) r.question_types.push_back("multi-entity");
      r.meta_entities.push_back({title, title});
    }
    VisualInput visual{Matrix(config.num_regions, config.region_feat_dim),
                       Matrix(config.num_regions, 4)};
    for (int i = 0; i < config.num_regions; ++i) {
      visual.features.row(i) =
          Gaussian(config.region_feat_dim, 1.0, rng).transpose();
      double x0 = unit(rng), x1 = unit(rng), y0 = unit(rng), y1 = unit(rng);
      visual.boxes.row(i) << std::min(x0, x1), std::min(y0, y1),
          std::max(x0, x1), std::max(y0, y1);
    }
    bench.regions.Add(r.image_ref, visual);
    bench.records.push_back(std::move(r));
  }

  SpanBuildOptions options;
  options.method = SpanMethod::kMeta;
  options.link_mode = LinkMode::kAsIs;
  bench.meta_spans = BuildSpanSet(bench.records, bench.wiki, options).spanset;
  return bench;
}

BenchmarkFiles BenchmarkFiles::In(const std::filesystem::path& dir) {
  return {dir / "dataset.jsonl",  dir / "wiki.txt",
          dir / "wordpieces.txt", dir / "regions.json",
          dir / "regions.bin",    dir / "spans_meta.jsonl",
          dir / "synthetic.json"};
}

void SaveBenchmark(const SyntheticBenchmark& bench, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const BenchmarkFiles files = BenchmarkFiles::In(dir);
  SaveDataset(bench.records, files.dataset);
  SaveTable(bench.wiki, files.wiki, NamespacePolicy::Words());
  SaveTable(bench.wordpieces, files.wordpieces, NamespacePolicy::Wordpieces());
  bench.regions.Save(files.region_index, files.region_data);
  SaveSpanSet(bench.meta_spans, files.meta_spans);
  std::ofstream out(files.config);
  if (!out) throw Error("cannot write " + files.config.string());
  out << bench.config.ToJson().dump(2) << '\n';
}

uint64_t BenchmarkChecksum(const SyntheticBenchmark& bench) {
  std::ostringstream text;
  WriteDataset(bench.records, text);
  WriteSpanSet(bench.meta_spans, text);
  uint64_t h = Fnv1a(text.str());
  for (const EmbeddingTable* table : {&bench.wiki, &bench.wordpieces}) {
    for (Namespace ns : {Namespace::kWord, Namespace::kEntity, Namespace::kWordpiece}) {
      for (const auto& key : table->Keys(ns)) {
        h = Fnv1a(key, h);
        const Vector& v = *table->Find(ns, key);
        h = Fnv1a(std::string_view(reinterpret_cast<const char*>(v.data()),
                                   v.size() * sizeof(double)),
                  h);
      }
    }
  }
  for (const auto& r : bench.records) {
    const VisualInput& v = bench.regions.Get(r.image_ref);
    for (uint64_t part : {MatrixChecksum(v.features), MatrixChecksum(v.boxes)}) {
      h = Fnv1a(std::string_view(reinterpret_cast<const char*>(&part), sizeof(part)), h);
    }
  }
  return h;
}

}  // namespace kbvqa
