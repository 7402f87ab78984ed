#include "kbvqa/embeddings.h"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

namespace kbvqa {
namespace {

[[noreturn]] void LineError(size_t line, const std::string& what) {
  throw Error("embedding table line " + std::to_string(line) + ": " + what);
}

std::vector<std::string_view> SplitSpaces(std::string_view line) {
  std::vector<std::string_view> fields;
  size_t pos = 0;
  while (pos <= line.size()) {
    size_t next = line.find(' ', pos);
    if (next == std::string_view::npos) next = line.size();
    fields.push_back(line.substr(pos, next - pos));
    pos = next + 1;
  }
  return fields;
}

bool ParseInt(std::string_view s, long* out) {
  if (s.empty()) return false;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
  }
  std::string tmp(s);
  errno = 0;
  *out = std::strtol(tmp.c_str(), nullptr, 10);
  return errno == 0;
}

bool ParseReal(std::string_view s, double* out) {
  if (s.empty()) return false;
  std::string tmp(s);
  char* end = nullptr;
  *out = std::strtod(tmp.c_str(), &end);
  return end == tmp.c_str() + tmp.size();
}

std::string_view StripCarriageReturn(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

}  // namespace

const char* NamespaceName(Namespace ns) {
  switch (ns) {
    case Namespace::kWord:
      return "WORD";
    case Namespace::kEntity:
      return "ENTITY";
    case Namespace::kWordpiece:
      return "WORDPIECE";
  }
  return "?";
}

EmbeddingTable::EmbeddingTable(int dim, bool cased) : dim_(dim), cased_(cased) {
  if (dim <= 0) throw Error("embedding dimension must be positive");
}

void EmbeddingTable::Add(Namespace ns, std::string key, Vector vec) {
  if (vec.size() != dim_) {
    throw Error("vector for '" + key + "' has " + std::to_string(vec.size()) +
                " values, expected " + std::to_string(dim_));
  }
  auto& entries = entries_[Index(ns)];
  if (entries.count(key) > 0) {
    throw Error(std::string("duplicate ") + NamespaceName(ns) + " key '" +
                key + "'");
  }
  std::string folded = AsciiLower(key);
  auto [it, inserted] = folded_[Index(ns)].emplace(folded, key);
  if (!inserted && key < it->second) it->second = key;
  entries.emplace(std::move(key), std::move(vec));
}

const Vector* EmbeddingTable::Find(Namespace ns, std::string_view key) const {
  const auto& entries = entries_[Index(ns)];
  auto it = entries.find(key);
  return it == entries.end() ? nullptr : &it->second;
}

const Vector* EmbeddingTable::FindFolded(Namespace ns,
                                         std::string_view key) const {
  if (const Vector* exact = Find(ns, key)) return exact;
  const auto& folded = folded_[Index(ns)];
  auto it = folded.find(AsciiLower(key));
  return it == folded.end() ? nullptr : Find(ns, it->second);
}

std::vector<std::string> EmbeddingTable::Keys(Namespace ns) const {
  std::vector<std::string> keys;
  keys.reserve(size(ns));
  for (const auto& [k, v] : entries_[Index(ns)]) keys.push_back(k);
  return keys;
}

size_t EmbeddingTable::total_size() const {
  return entries_[0].size() + entries_[1].size() + entries_[2].size();
}

EmbeddingTable ParseTable(std::istream& in, NamespacePolicy policy) {
  std::string raw;
  if (!std::getline(in, raw)) throw Error("missing header");
  std::string_view header = StripCarriageReturn(raw);
  if (header.empty()) throw Error("missing header");
  const auto head = SplitSpaces(header);
  long count = 0;
  long dim = 0;
  if (head.size() != 2 || !ParseInt(head[0], &count) ||
      !ParseInt(head[1], &dim) || dim <= 0) {
    LineError(1, "malformed header '" + std::string(header) + "'");
  }

  EmbeddingTable table(static_cast<int>(dim), policy.cased);
  size_t line_no = 1;
  long rows = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = StripCarriageReturn(raw);
    if (line.empty()) continue;
    const auto fields = SplitSpaces(line);
    if (fields[0].empty()) LineError(line_no, "empty key");
    if (static_cast<long>(fields.size()) - 1 != dim) {
      LineError(line_no, std::to_string(fields.size() - 1) +
                             " values, expected " + std::to_string(dim));
    }
    Vector vec(dim);
    for (long i = 0; i < dim; ++i) {
      if (!ParseReal(fields[i + 1], &vec[i])) {
        LineError(line_no, "bad number '" + std::string(fields[i + 1]) + "'");
      }
    }
    std::string key(fields[0]);
    Namespace ns = policy.plain;
    if (key.starts_with(kEntityPrefix)) {
      ns = Namespace::kEntity;
      key.erase(0, kEntityPrefix.size());
      if (key.empty()) LineError(line_no, "empty entity key");
      std::replace(key.begin(), key.end(), '_', ' ');
    }
    if (table.Contains(ns, key)) {
      LineError(line_no, "duplicate key '" + std::string(fields[0]) + "'");
    }
    table.Add(ns, std::move(key), std::move(vec));
    ++rows;
  }
  if (rows != count) {
    throw Error("embedding table declares " + std::to_string(count) +
                " rows but has " + std::to_string(rows));
  }
  return table;
}

EmbeddingTable LoadTable(const std::filesystem::path& path,
                         NamespacePolicy policy) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open embedding table " + path.string());
  try {
    return ParseTable(in, policy);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void SaveTable(const EmbeddingTable& table, const std::filesystem::path& path,
               NamespacePolicy policy) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  size_t count = table.size(policy.plain) + table.size(Namespace::kEntity);
  out << count << ' ' << table.dim() << '\n';
  auto write = [&](Namespace ns, std::string_view prefix) {
    for (const auto& key : table.Keys(ns)) {
      std::string disk = key;
      if (ns == Namespace::kEntity) std::replace(disk.begin(), disk.end(), ' ', '_');
      out << prefix << disk;
      for (double v : *table.Find(ns, key)) out << ' ' << FormatDouble(v);
      out << '\n';
    }
  };
  write(policy.plain, "");
  write(Namespace::kEntity, kEntityPrefix);
  if (!out) throw Error("write failed for " + path.string());
}

std::vector<std::string> SharedVocabulary(const EmbeddingTable& src,
                                          const EmbeddingTable& tgt) {
  std::set<std::string> words;
  for (const auto& key : src.Keys(Namespace::kWord)) {
    words.insert(AsciiLower(key));
  }
  std::set<std::string> shared;
  for (const auto& key : tgt.Keys(Namespace::kWordpiece)) {
    if (key.starts_with(kContinuationPrefix)) continue;
    std::string folded = AsciiLower(key);
    if (words.count(folded) > 0) shared.insert(std::move(folded));
  }
  if (shared.empty()) throw Error("no shared vocabulary");
  return {shared.begin(), shared.end()};
}

AlignmentMap::AlignmentMap(Matrix matrix, AlignmentFit fit)
    : matrix_(std::move(matrix)), fit_(fit) {
  if (fit_.sum_squared_residual < 0) {
    throw Error("negative alignment residual");
  }
}

Vector AlignmentMap::Map(const Vector& source) const {
  if (source.size() != matrix_.cols()) {
    throw Error("entity vector has dimension " +
                std::to_string(source.size()) + ", alignment expects " +
                std::to_string(matrix_.cols()));
  }
  return matrix_ * source;
}

void AlignmentMap::Save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << target_dim() << ' ' << source_dim() << ' ' << fit_.num_shared_keys
      << ' ' << FormatDouble(fit_.sum_squared_residual) << '\n';
  for (Eigen::Index r = 0; r < matrix_.rows(); ++r) {
    for (Eigen::Index c = 0; c < matrix_.cols(); ++c) {
      if (c > 0) out << ' ';
      out << FormatDouble(matrix_(r, c));
    }
    out << '\n';
  }
  if (!out) throw Error("write failed for " + path.string());
}

AlignmentMap AlignmentMap::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open alignment " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error("alignment: missing header");
  std::istringstream head(line);
  long rows = 0;
  long cols = 0;
  AlignmentFit fit;
  if (!(head >> rows >> cols >> fit.num_shared_keys >>
        fit.sum_squared_residual) ||
      rows <= 0 || cols <= 0) {
    throw Error("alignment: malformed header '" + line + "'");
  }
  Matrix m(rows, cols);
  for (long r = 0; r < rows; ++r) {
    if (!std::getline(in, line)) {
      throw Error("alignment: missing row " + std::to_string(r + 1));
    }
    std::istringstream row(line);
    for (long c = 0; c < cols; ++c) {
      if (!(row >> m(r, c))) {
        throw Error("alignment: short row at line " + std::to_string(r + 2));
      }
    }
  }
  return AlignmentMap(std::move(m), fit);
}

AlignmentMap FitLinearMap(const Matrix& sources, const Matrix& targets) {
  if (sources.rows() == 0) throw Error("no shared keys to fit");
  if (sources.rows() != targets.rows()) {
    throw Error("source/target sample counts differ");
  }
  if (!sources.allFinite() || !targets.allFinite()) {
    throw Error("non-finite embedding values in alignment fit");
  }
  // Column-major copies suit the decomposition.
  const Eigen::MatrixXd x = sources;
  const Eigen::MatrixXd y = targets;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(x);
  const Eigen::MatrixXd wt = cod.solve(y);  // s x t, minimum norm
  AlignmentFit fit;
  fit.num_shared_keys = static_cast<int>(sources.rows());
  fit.sum_squared_residual = (x * wt - y).squaredNorm();
  fit.effective_rank = static_cast<int>(cod.rank());
  return AlignmentMap(Matrix(wt.transpose()), fit);
}

AlignmentMap LearnAlignment(const EmbeddingTable& src,
                            const EmbeddingTable& tgt,
                            const std::vector<std::string>& keys) {
  if (keys.empty()) throw Error("no shared keys to fit");
  Matrix x(keys.size(), src.dim());
  Matrix y(keys.size(), tgt.dim());
  for (size_t i = 0; i < keys.size(); ++i) {
    const Vector* s = src.FindFolded(Namespace::kWord, keys[i]);
    const Vector* t = tgt.FindFolded(Namespace::kWordpiece, keys[i]);
    if (s == nullptr || t == nullptr) {
      throw Error("shared key '" + keys[i] + "' missing from a table");
    }
    x.row(i) = s->transpose();
    y.row(i) = t->transpose();
  }
  return FitLinearMap(x, y);
}

}  // namespace kbvqa
