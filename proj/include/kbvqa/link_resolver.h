#ifndef KBVQA_LINK_RESOLVER_H_
#define KBVQA_LINK_RESOLVER_H_

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

namespace kbvqa {

// Looks up the most likely wiki title for a text query. Returns nullopt
// when the search finds nothing; throws TransportError when the backend is
// unreachable.
class LinkResolver {
 public:
  virtual ~LinkResolver() = default;
  virtual std::optional<std::string> Search(const std::string& query) = 0;
};

// Offline resolver over a fixed query -> title table. A JSONL file of
// {"query": ..., "title": ...} lines (title may be null) seeds it; a row
// with "fail": true makes that query raise TransportError.
class StubLinkResolver : public LinkResolver {
 public:
  StubLinkResolver() = default;
  explicit StubLinkResolver(std::map<std::string, std::string> titles);
  static StubLinkResolver Load(const std::filesystem::path& path);

  // Queries listed here raise TransportError, for exercising failure paths.
  void AddFailingQuery(std::string query);

  std::optional<std::string> Search(const std::string& query) override;

  int calls() const { return calls_; }

 private:
  std::map<std::string, std::string> titles_;
  std::map<std::string, bool> failing_;
  int calls_ = 0;
};

// Spaces out calls so that at most `per_second` start in any second.
class RateLimiter {
 public:
  using Clock = std::chrono::steady_clock;
  explicit RateLimiter(double per_second);

  void Acquire();
  double per_second() const { return per_second_; }

 private:
  double per_second_;
  std::mutex mu_;
  Clock::time_point next_;
};

// Reads the live client's rate from KBVQA_RESOLVER_RPS (default 1).
double ResolverRateFromEnv();

// Queries a MediaWiki opensearch endpoint over plain HTTP, one request at a
// time through a rate limiter.
class HttpLinkResolver : public LinkResolver {
 public:
  HttpLinkResolver(std::string host, int port, std::string api_path,
                   double requests_per_second);

  std::optional<std::string> Search(const std::string& query) override;

 private:
  std::string host_;
  int port_;
  std::string api_path_;
  RateLimiter limiter_;
  std::mutex request_mu_;
};

// Disk-backed memo in front of another resolver, keyed by the exact query
// string. Transport failures are not cached. Reads share a lock; writes
// (including the JSONL append) take it exclusively.
class CachingLinkResolver : public LinkResolver {
 public:
  using TimestampFn = std::function<std::string()>;

  CachingLinkResolver(LinkResolver* inner, std::filesystem::path cache_path,
                      TimestampFn timestamp = nullptr);

  std::optional<std::string> Search(const std::string& query) override;

  size_t cached_entries() const;
  int misses() const { return misses_; }

 private:
  LinkResolver* inner_;
  std::filesystem::path cache_path_;
  TimestampFn timestamp_;
  mutable std::shared_mutex mu_;
  std::map<std::string, std::optional<std::string>> cache_;
  int misses_ = 0;
};

}  // namespace kbvqa

#endif  // KBVQA_LINK_RESOLVER_H_
