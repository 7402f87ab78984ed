#include "kbvqa/dataset.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

namespace kbvqa {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

const json& Field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) throw Error(std::string("missing field '") + name + "'");
  return *it;
}

std::string StringField(const json& j, const char* name) {
  const json& v = Field(j, name);
  if (!v.is_string()) throw Error(std::string("field '") + name + "' must be a string");
  return v.get<std::string>();
}

float ToFloat(double v) { return static_cast<float>(v); }

void AppendFloat(std::string& buf, float v) {
  static_assert(std::endian::native == std::endian::little,
                "region store assumes a little-endian host");
  char bytes[sizeof(float)];
  std::memcpy(bytes, &v, sizeof(float));
  buf.append(bytes, sizeof(float));
}

}  // namespace

ordered_json RecordToJson(const QuestionRecord& record) {
  ordered_json j;
  j["id"] = record.id;
  j["question"] = record.question;
  j["caption"] = record.caption ? ordered_json(*record.caption) : nullptr;
  j["image_ref"] = record.image_ref;
  ordered_json answers = ordered_json::array();
  for (const auto& a : record.answers) {
    answers.push_back({{"text", a.text}, {"weight", a.weight}});
  }
  j["answers"] = std::move(answers);
  j["question_types"] = record.question_types;
  ordered_json metas = ordered_json::array();
  for (const auto& m : record.meta_entities) {
    ordered_json e;
    e["name"] = m.name;
    e["wiki_title"] = m.wiki_title ? ordered_json(*m.wiki_title) : nullptr;
    metas.push_back(std::move(e));
  }
  j["meta_entities"] = std::move(metas);
  j["split"] = record.split;
  return j;
}

QuestionRecord RecordFromJson(const json& j) {
  if (!j.is_object()) throw Error("record must be a JSON object");
  QuestionRecord r;
  r.id = StringField(j, "id");
  if (r.id.empty()) throw Error("empty id");
  r.question = StringField(j, "question");
  if (auto it = j.find("caption"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw Error("field 'caption' must be a string");
    r.caption = it->get<std::string>();
  }
  r.image_ref = StringField(j, "image_ref");
  const json& answers = Field(j, "answers");
  if (!answers.is_array()) throw Error("field 'answers' must be an array");
  for (const auto& a : answers) {
    Answer answer;
    answer.text = StringField(a, "text");
    answer.weight = a.value("weight", 1.0);
    if (!(answer.weight > 0 && answer.weight <= 1)) {
      throw Error("answer weight must be in (0, 1]");
    }
    r.answers.push_back(std::move(answer));
  }
  if (auto it = j.find("question_types"); it != j.end()) {
    r.question_types = it->get<std::vector<std::string>>();
  }
  if (auto it = j.find("meta_entities"); it != j.end()) {
    for (const auto& m : *it) {
      MetaEntity meta;
      meta.name = StringField(m, "name");
      if (auto t = m.find("wiki_title"); t != m.end() && !t->is_null()) {
        meta.wiki_title = t->get<std::string>();
      }
      r.meta_entities.push_back(std::move(meta));
    }
  }
  r.split = StringField(j, "split");
  return r;
}

std::vector<QuestionRecord> ParseDataset(std::istream& in) {
  std::vector<QuestionRecord> records;
  std::set<std::string> ids;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      QuestionRecord r = RecordFromJson(json::parse(line));
      if (!ids.insert(r.id).second) throw Error("duplicate id '" + r.id + "'");
      records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw Error("dataset line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

std::vector<QuestionRecord> LoadDataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return ParseDataset(in);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void WriteDataset(const std::vector<QuestionRecord>& records, std::ostream& out) {
  for (const auto& r : records) out << RecordToJson(r).dump() << '\n';
}

void SaveDataset(const std::vector<QuestionRecord>& records,
                 const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  WriteDataset(records, out);
  if (!out) throw Error("write failed for " + path.string());
}

std::vector<QuestionRecord> SelectSplit(const std::vector<QuestionRecord>& records,
                                        std::string_view split) {
  std::vector<QuestionRecord> out;
  for (const auto& r : records) {
    if (r.split == split) out.push_back(r);
  }
  return out;
}

void RegionStore::Add(const std::string& image_ref, const VisualInput& visual) {
  if (visual.features.rows() != visual.boxes.rows() || visual.boxes.cols() != 4) {
    throw Error("region features and boxes disagree for '" + image_ref + "'");
  }
  if (feature_dim_ == 0) feature_dim_ = static_cast<int>(visual.features.cols());
  if (visual.features.cols() != feature_dim_) {
    throw Error("region feature width mismatch for '" + image_ref + "'");
  }
  if (entries_.count(image_ref) > 0) {
    throw Error("duplicate image_ref '" + image_ref + "'");
  }
  VisualInput stored{visual.features.unaryExpr(&ToFloat).cast<double>(),
                     visual.boxes.unaryExpr(&ToFloat).cast<double>()};
  entries_.emplace(image_ref, std::move(stored));
}

bool RegionStore::Contains(std::string_view image_ref) const {
  return entries_.find(image_ref) != entries_.end();
}

const VisualInput& RegionStore::Get(std::string_view image_ref) const {
  auto it = entries_.find(image_ref);
  if (it == entries_.end()) {
    throw Error("unknown image_ref '" + std::string(image_ref) + "'");
  }
  return it->second;
}

void RegionStore::Save(const std::filesystem::path& index_path,
                       const std::filesystem::path& data_path) const {
  ordered_json index;
  index["feature_dim"] = feature_dim_;
  ordered_json images = ordered_json::object();
  std::string data;
  size_t offset = 0;
  for (const auto& [ref, visual] : entries_) {
    images[ref] = {{"offset", offset}, {"num_regions", visual.features.rows()}};
    for (Eigen::Index r = 0; r < visual.features.rows(); ++r) {
      for (double v : visual.features.row(r)) AppendFloat(data, static_cast<float>(v));
      for (double v : visual.boxes.row(r)) AppendFloat(data, static_cast<float>(v));
    }
    offset += visual.features.rows();
  }
  index["images"] = std::move(images);
  std::ofstream idx(index_path);
  if (!idx) throw Error("cannot write " + index_path.string());
  idx << index.dump(2) << '\n';
  std::ofstream bin(data_path, std::ios::binary);
  if (!bin) throw Error("cannot write " + data_path.string());
  bin.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!idx || !bin) throw Error("region store write failed");
}

RegionStore RegionStore::Load(const std::filesystem::path& index_path,
                              const std::filesystem::path& data_path) {
  std::ifstream idx(index_path);
  if (!idx) throw Error("cannot open " + index_path.string());
  json index;
  try {
    index = json::parse(idx);
  } catch (const json::exception& e) {
    throw Error(index_path.string() + ": " + e.what());
  }
  const int dim = index.at("feature_dim").get<int>();
  if (dim <= 0) throw Error("region store feature_dim must be positive");
  std::ifstream bin(data_path, std::ios::binary);
  if (!bin) throw Error("cannot open " + data_path.string());
  std::string data((std::istreambuf_iterator<char>(bin)),
                   std::istreambuf_iterator<char>());
  const size_t row_floats = static_cast<size_t>(dim) + 4;
  const size_t row_bytes = row_floats * sizeof(float);
  RegionStore store(dim);
  for (const auto& [ref, entry] : index.at("images").items()) {
    const size_t offset = entry.at("offset").get<size_t>();
    const size_t rows = entry.at("num_regions").get<size_t>();
    if ((offset + rows) * row_bytes > data.size()) {
      throw Error("region store entry '" + ref + "' runs past the data file");
    }
    VisualInput visual{Matrix(rows, dim), Matrix(rows, 4)};
    const char* base = data.data() + offset * row_bytes;
    for (size_t r = 0; r < rows; ++r) {
      for (size_t c = 0; c < row_floats; ++c) {
        float v;
        std::memcpy(&v, base + (r * row_floats + c) * sizeof(float), sizeof(float));
        if (c < static_cast<size_t>(dim)) {
          visual.features(r, c) = v;
        } else {
          visual.boxes(r, c - dim) = v;
        }
      }
    }
    store.Add(ref, visual);
  }
  return store;
}

}  // namespace kbvqa
