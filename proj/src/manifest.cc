#include "kbvqa/manifest.h"

#include <fstream>
#include <iterator>
#include <memory>

#include <openssl/evp.h>

#include "kbvqa/common.h"

namespace kbvqa {

std::string GitBlobSha1(std::string_view data) {
  const std::string header = "blob " + std::to_string(data.size()) + '\0';
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                              &EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), header.data(), header.size()) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &length) != 1) {
    throw Error("sha1 digest failed");
  }
  static const char* kHex = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < length; ++i) {
    hex += kHex[digest[i] >> 4];
    hex += kHex[digest[i] & 15];
  }
  return hex;
}

std::string GitBlobSha1File(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot hash " + path.string());
  const std::string data((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  return GitBlobSha1(data);
}

nlohmann::ordered_json Manifest::ToJson() const {
  auto files = [](const std::vector<std::filesystem::path>& paths) {
    nlohmann::ordered_json list = nlohmann::ordered_json::array();
    for (const auto& p : paths) {
      list.push_back({{"path", p.generic_string()}, {"sha1", GitBlobSha1File(p)}});
    }
    return list;
  };
  nlohmann::ordered_json j;
  j["command"] = command;
  j["config"] = config;
  j["seeds"] = seeds;
  j["inputs"] = files(inputs);
  j["outputs"] = files(outputs);
  return j;
}

void Manifest::Write(const std::filesystem::path& path) const {
  const std::string text = ToJson().dump(2) + "\n";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace kbvqa
