#ifndef KBVQA_DATASET_H_
#define KBVQA_DATASET_H_

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "kbvqa/model.h"
#include "kbvqa/spans.h"

namespace kbvqa {

nlohmann::ordered_json RecordToJson(const QuestionRecord& record);
// Throws naming the missing or mistyped field.
QuestionRecord RecordFromJson(const nlohmann::json& j);

// JSONL, one record per line; blank lines are skipped. Errors carry the
// 1-based line number. Ids must be unique.
std::vector<QuestionRecord> ParseDataset(std::istream& in);
std::vector<QuestionRecord> LoadDataset(const std::filesystem::path& path);
void WriteDataset(const std::vector<QuestionRecord>& records, std::ostream& out);
void SaveDataset(const std::vector<QuestionRecord>& records,
                 const std::filesystem::path& path);

// Records of one split, in file order.
std::vector<QuestionRecord> SelectSplit(const std::vector<QuestionRecord>& records,
                                        std::string_view split);

// Precomputed region features keyed by image reference. On disk: a JSON
// index {"feature_dim": D, "images": {image_ref: {"offset", "num_regions"}}}
// with offsets counted in rows, plus a flat little-endian float32 file of
// (features || boxes) rows.
class RegionStore {
 public:
  explicit RegionStore(int feature_dim = 0) : feature_dim_(feature_dim) {}

  // Values are stored as float32 and read back as exactly those values.
  void Add(const std::string& image_ref, const VisualInput& visual);
  bool Contains(std::string_view image_ref) const;
  // Throws when the reference is unknown.
  const VisualInput& Get(std::string_view image_ref) const;

  int feature_dim() const { return feature_dim_; }
  size_t size() const { return entries_.size(); }

  void Save(const std::filesystem::path& index_path,
            const std::filesystem::path& data_path) const;
  static RegionStore Load(const std::filesystem::path& index_path,
                          const std::filesystem::path& data_path);

 private:
  int feature_dim_;
  std::map<std::string, VisualInput, std::less<>> entries_;
};

}  // namespace kbvqa

#endif  // KBVQA_DATASET_H_
