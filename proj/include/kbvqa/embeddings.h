#ifndef KBVQA_EMBEDDINGS_H_
#define KBVQA_EMBEDDINGS_H_

#include <array>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "kbvqa/common.h"

namespace kbvqa {

enum class Namespace { kWord = 0, kEntity = 1, kWordpiece = 2 };

const char* NamespaceName(Namespace ns);

// Keys carrying this prefix on disk load into the ENTITY namespace, with
// underscores read as spaces ("ENTITY/Barack_Obama" -> "Barack Obama").
inline constexpr std::string_view kEntityPrefix = "ENTITY/";
// Marks wordpieces that continue a word.
inline constexpr std::string_view kContinuationPrefix = "##";

// Decides where unprefixed keys go when a table is read from disk.
struct NamespacePolicy {
  Namespace plain = Namespace::kWord;
  bool cased = true;

  static NamespacePolicy Words() { return {Namespace::kWord, true}; }
  static NamespacePolicy Wordpieces() { return {Namespace::kWordpiece, false}; }
};

// Keyed fixed-dimension vectors, partitioned into namespaces. Immutable once
// built; safe to share between readers.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(int dim, bool cased = true);

  // Throws on a wrong-length vector or a duplicate key.
  void Add(Namespace ns, std::string key, Vector vec);

  const Vector* Find(Namespace ns, std::string_view key) const;
  bool Contains(Namespace ns, std::string_view key) const {
    return Find(ns, key) != nullptr;
  }

  // Case-insensitive lookup. An exact match wins; otherwise the smallest
  // key (byte order) that folds to the same string.
  const Vector* FindFolded(Namespace ns, std::string_view key) const;

  // Sorted keys of one namespace.
  std::vector<std::string> Keys(Namespace ns) const;

  size_t size(Namespace ns) const { return entries_[Index(ns)].size(); }
  size_t total_size() const;
  int dim() const { return dim_; }
  bool cased() const { return cased_; }

 private:
  static size_t Index(Namespace ns) { return static_cast<size_t>(ns); }

  int dim_;
  bool cased_;
  std::array<std::map<std::string, Vector, std::less<>>, 3> entries_;
  // Folded key -> smallest original key.
  std::array<std::map<std::string, std::string, std::less<>>, 3> folded_;
};

// Reads the "<count> <dim>" text format. Errors name the offending line.
EmbeddingTable ParseTable(std::istream& in, NamespacePolicy policy);
EmbeddingTable LoadTable(const std::filesystem::path& path,
                         NamespacePolicy policy);
// Writes every namespace; ENTITY keys get the on-disk prefix. The plain
// namespace of `policy` is written unprefixed.
void SaveTable(const EmbeddingTable& table, const std::filesystem::path& path,
               NamespacePolicy policy);

// Case-folded intersection of src WORD keys and tgt full-word WORDPIECE keys,
// sorted. Throws when empty.
std::vector<std::string> SharedVocabulary(const EmbeddingTable& src,
                                          const EmbeddingTable& tgt);

struct AlignmentFit {
  int num_shared_keys = 0;
  double sum_squared_residual = 0.0;
  int effective_rank = 0;
};

// Linear map from the entity-embedding space into the wordpiece space.
class AlignmentMap {
 public:
  AlignmentMap(Matrix matrix, AlignmentFit fit);

  // Exact matrix-vector product; throws on dimension mismatch.
  Vector Map(const Vector& source) const;

  const Matrix& matrix() const { return matrix_; }
  const AlignmentFit& fit() const { return fit_; }
  int source_dim() const { return static_cast<int>(matrix_.cols()); }
  int target_dim() const { return static_cast<int>(matrix_.rows()); }

  void Save(const std::filesystem::path& path) const;
  static AlignmentMap Load(const std::filesystem::path& path);

 private:
  Matrix matrix_;
  AlignmentFit fit_;
};

// Minimum-norm least squares: W = argmin ||X W^T - Y||_F^2, X is n x s and
// Y is n x t, returning W as t x s.
AlignmentMap FitLinearMap(const Matrix& sources, const Matrix& targets);

// Fits the map over `keys` (folded keys from SharedVocabulary), one row per
// key, uniformly weighted.
AlignmentMap LearnAlignment(const EmbeddingTable& src,
                            const EmbeddingTable& tgt,
                            const std::vector<std::string>& keys);

}  // namespace kbvqa

#endif  // KBVQA_EMBEDDINGS_H_
