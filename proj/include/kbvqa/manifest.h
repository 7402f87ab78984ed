#ifndef KBVQA_MANIFEST_H_
#define KBVQA_MANIFEST_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace kbvqa {

// Hex SHA-1 of "blob <size>\0" + data, as `git hash-object` prints it.
std::string GitBlobSha1(std::string_view data);
std::string GitBlobSha1File(const std::filesystem::path& path);

// Provenance record written next to every run's artifacts.
struct Manifest {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::map<std::string, uint64_t> seeds;
  std::vector<std::filesystem::path> inputs;
  std::vector<std::filesystem::path> outputs;

  // {command, config, seeds, inputs: [{path, sha1}], outputs: [...]}.
  // Files are hashed at call time; missing files throw.
  nlohmann::ordered_json ToJson() const;
  void Write(const std::filesystem::path& path) const;
};

}  // namespace kbvqa

#endif  // KBVQA_MANIFEST_H_
