#include "kbvqa/link_resolver.h"

#include <cstdlib>
#include <ctime>
#include <fstream>
#include <thread>
#include <vector>

#include "kbvqa/common.h"
// After Eigen: the resolver headers pulled in here define a `_res` macro.
#include "httplib.h"
#include "json.hpp"

namespace kbvqa {

using nlohmann::json;

StubLinkResolver::StubLinkResolver(std::map<std::string, std::string> titles)
    : titles_(std::move(titles)) {}

StubLinkResolver StubLinkResolver::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open resolver stub " + path.string());
  std::map<std::string, std::string> titles;
  std::vector<std::string> failing;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json row = json::parse(line);
      const std::string query = row.at("query").get<std::string>();
      if (row.value("fail", false)) {
        failing.push_back(query);
      } else if (row.at("title").is_string()) {
        titles[query] = row.at("title").get<std::string>();
      }
    } catch (const json::exception& e) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": " +
                  e.what());
    }
  }
  StubLinkResolver stub(std::move(titles));
  for (auto& query : failing) stub.AddFailingQuery(std::move(query));
  return stub;
}

void StubLinkResolver::AddFailingQuery(std::string query) {
  failing_[std::move(query)] = true;
}

std::optional<std::string> StubLinkResolver::Search(const std::string& query) {
  ++calls_;
  if (failing_.count(query) > 0) {
    throw TransportError("stub transport failure for '" + query + "'");
  }
  auto it = titles_.find(query);
  if (it == titles_.end()) return std::nullopt;
  return it->second;
}

RateLimiter::RateLimiter(double per_second)
    : per_second_(per_second), next_(Clock::now()) {
  if (!(per_second > 0)) throw Error("rate limit must be positive");
}

void RateLimiter::Acquire() {
  Clock::time_point slot;
  {
    std::lock_guard<std::mutex> lock(mu_);
    const auto now = Clock::now();
    slot = std::max(now, next_);
    next_ = slot + std::chrono::duration_cast<Clock::duration>(
                       std::chrono::duration<double>(1.0 / per_second_));
  }
  std::this_thread::sleep_until(slot);
}

double ResolverRateFromEnv() {
  const char* value = std::getenv("KBVQA_RESOLVER_RPS");
  if (value == nullptr || *value == '\0') return 1.0;
  char* end = nullptr;
  const double rps = std::strtod(value, &end);
  if (*end != '\0' || !(rps > 0)) {
    throw Error(std::string("bad KBVQA_RESOLVER_RPS '") + value + "'");
  }
  return rps;
}

HttpLinkResolver::HttpLinkResolver(std::string host, int port,
                                   std::string api_path,
                                   double requests_per_second)
    : host_(std::move(host)),
      port_(port),
      api_path_(std::move(api_path)),
      limiter_(requests_per_second) {}

std::optional<std::string> HttpLinkResolver::Search(const std::string& query) {
  std::lock_guard<std::mutex> lock(request_mu_);
  limiter_.Acquire();
  httplib::Client client(host_, port_);
  client.set_connection_timeout(5);
  client.set_read_timeout(10);
  const httplib::Params params = {{"action", "opensearch"},
                                  {"format", "json"},
                                  {"limit", "1"},
                                  {"search", query}};
  auto res = client.Get(api_path_, params, httplib::Headers{});
  if (!res) {
    throw TransportError("resolver request failed: " +
                         httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw TransportError("resolver returned HTTP " +
                         std::to_string(res->status));
  }
  // opensearch answers [query, [titles...], [descriptions...], [urls...]].
  try {
    const json body = json::parse(res->body);
    const json& titles = body.at(1);
    if (titles.empty()) return std::nullopt;
    return titles.at(0).get<std::string>();
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed resolver response: ") +
                         e.what());
  }
}

CachingLinkResolver::CachingLinkResolver(LinkResolver* inner,
                                         std::filesystem::path cache_path,
                                         TimestampFn timestamp)
    : inner_(inner),
      cache_path_(std::move(cache_path)),
      timestamp_(std::move(timestamp)) {
  if (!timestamp_) {
    timestamp_ = [] {
      const std::time_t now = std::time(nullptr);
      char buf[32];
      std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
      return std::string(buf);
    };
  }
  std::ifstream in(cache_path_);
  std::string line;
  size_t line_no = 0;
  while (in && std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json row = json::parse(line);
      std::optional<std::string> title;
      if (row.at("title").is_string()) title = row.at("title").get<std::string>();
      cache_[row.at("query").get<std::string>()] = title;
    } catch (const json::exception& e) {
      throw Error(cache_path_.string() + ":" + std::to_string(line_no) + ": " +
                  e.what());
    }
  }
}

std::optional<std::string> CachingLinkResolver::Search(
    const std::string& query) {
  {
    std::shared_lock<std::shared_mutex> lock(mu_);
    auto it = cache_.find(query);
    if (it != cache_.end()) return it->second;
  }
  std::unique_lock<std::shared_mutex> lock(mu_);
  auto it = cache_.find(query);
  if (it != cache_.end()) return it->second;
  ++misses_;
  std::optional<std::string> title = inner_->Search(query);
  cache_[query] = title;
  nlohmann::ordered_json row;
  row["query"] = query;
  row["title"] = title ? nlohmann::ordered_json(*title) : nullptr;
  row["timestamp"] = timestamp_();
  std::ofstream out(cache_path_, std::ios::app);
  if (!out) throw Error("cannot append to resolver cache " + cache_path_.string());
  out << row.dump() << '\n';
  return title;
}

size_t CachingLinkResolver::cached_entries() const {
  std::shared_lock<std::shared_mutex> lock(mu_);
  return cache_.size();
}

}  // namespace kbvqa
