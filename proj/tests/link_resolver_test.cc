#include "kbvqa/link_resolver.h"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <thread>

#include <gtest/gtest.h>

#include "kbvqa/common.h"
// After Eigen: httplib pulls in a header defining a `_res` macro.
#include "httplib.h"

namespace kbvqa {
namespace {

class TempFile {
 public:
  explicit TempFile(const std::string& name)
      : path_(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove(path_);
  }
  ~TempFile() { std::filesystem::remove(path_); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

size_t LineCount(const std::filesystem::path& path) {
  std::ifstream in(path);
  size_t n = 0;
  std::string line;
  while (std::getline(in, line)) n += !line.empty();
  return n;
}

TEST(StubLinkResolverTest, LooksUpExactQueries) {
  StubLinkResolver stub(std::map<std::string, std::string>{{"Top Gun", "Top Gun"}});
  EXPECT_EQ(stub.Search("Top Gun"), "Top Gun");
  EXPECT_EQ(stub.Search("top gun"), std::nullopt);
  EXPECT_EQ(stub.calls(), 2);
}

TEST(StubLinkResolverTest, FailingQueriesThrow) {
  StubLinkResolver stub;
  stub.AddFailingQuery("down");
  EXPECT_THROW(stub.Search("down"), TransportError);
}

TEST(StubLinkResolverTest, LoadsJsonl) {
  TempFile file("kbvqa_stub_test.jsonl");
  {
    std::ofstream out(file.path());
    out << R"j({"query": "Top Gun", "title": "Top Gun (film)"})j" << "\n\n"
        << R"({"query": "nothing", "title": null})" << "\n"
        << R"({"query": "broken", "title": null, "fail": true})" << "\n";
  }
  auto stub = StubLinkResolver::Load(file.path());
  EXPECT_EQ(stub.Search("Top Gun"), "Top Gun (film)");
  EXPECT_EQ(stub.Search("nothing"), std::nullopt);
  EXPECT_THROW(stub.Search("broken"), TransportError);
}

TEST(StubLinkResolverTest, MalformedLineNamesLine) {
  TempFile file("kbvqa_stub_bad.jsonl");
  {
    std::ofstream out(file.path());
    out << R"({"query": "a", "title": "A"})" << "\n{oops\n";
  }
  try {
    StubLinkResolver::Load(file.path());
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
}

TEST(CachingLinkResolverTest, CachesHitsAndMisses) {
  TempFile cache("kbvqa_cache_test.jsonl");
  StubLinkResolver stub(std::map<std::string, std::string>{{"Top Gun", "Top Gun"}});
  CachingLinkResolver resolver(&stub, cache.path(), [] { return std::string("T0"); });
  EXPECT_EQ(resolver.Search("Top Gun"), "Top Gun");
  EXPECT_EQ(resolver.Search("Top Gun"), "Top Gun");
  EXPECT_EQ(resolver.Search("nobody"), std::nullopt);
  EXPECT_EQ(resolver.Search("nobody"), std::nullopt);
  EXPECT_EQ(stub.calls(), 2);
  EXPECT_EQ(resolver.misses(), 2);
  EXPECT_EQ(resolver.cached_entries(), 2u);

  std::ifstream in(cache.path());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, R"({"query":"Top Gun","title":"Top Gun","timestamp":"T0"})");
  std::getline(in, line);
  EXPECT_EQ(line, R"({"query":"nobody","title":null,"timestamp":"T0"})");
}

TEST(CachingLinkResolverTest, TransportFailuresAreNotCached) {
  TempFile cache("kbvqa_cache_fail.jsonl");
  StubLinkResolver stub;
  stub.AddFailingQuery("flaky");
  CachingLinkResolver resolver(&stub, cache.path());
  EXPECT_THROW(resolver.Search("flaky"), TransportError);
  EXPECT_THROW(resolver.Search("flaky"), TransportError);
  EXPECT_EQ(stub.calls(), 2);
  EXPECT_EQ(resolver.cached_entries(), 0u);
  EXPECT_EQ(LineCount(cache.path()), 0u);
}

TEST(CachingLinkResolverTest, ReloadsPersistedEntries) {
  TempFile cache("kbvqa_cache_reload.jsonl");
  {
    StubLinkResolver stub(std::map<std::string, std::string>{{"Top Gun", "Top Gun"}});
    CachingLinkResolver resolver(&stub, cache.path());
    resolver.Search("Top Gun");
    resolver.Search("nobody");
  }
  StubLinkResolver empty;
  CachingLinkResolver reloaded(&empty, cache.path());
  EXPECT_EQ(reloaded.cached_entries(), 2u);
  EXPECT_EQ(reloaded.Search("Top Gun"), "Top Gun");
  EXPECT_EQ(reloaded.Search("nobody"), std::nullopt);
  EXPECT_EQ(empty.calls(), 0);
}

TEST(CachingLinkResolverTest, ConcurrentReadersShareOneLookup) {
  TempFile cache("kbvqa_cache_threads.jsonl");
  StubLinkResolver stub(std::map<std::string, std::string>{{"q", "Q"}});
  CachingLinkResolver resolver(&stub, cache.path());
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 50; ++i) EXPECT_EQ(resolver.Search("q"), "Q");
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(stub.calls(), 1);
  EXPECT_EQ(LineCount(cache.path()), 1u);
}

TEST(RateLimiterTest, SpacesCalls) {
  RateLimiter limiter(50.0);
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 6; ++i) limiter.Acquire();
  const double elapsed = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - start).count();
  // Five gaps of 20 ms after the first call.
  EXPECT_GE(elapsed, 0.095);
  EXPECT_THROW(RateLimiter(0.0), Error);
}

TEST(ResolverRateFromEnvTest, ParsesOrDefaults) {
  unsetenv("KBVQA_RESOLVER_RPS");
  EXPECT_EQ(ResolverRateFromEnv(), 1.0);
  setenv("KBVQA_RESOLVER_RPS", "2.5", 1);
  EXPECT_EQ(ResolverRateFromEnv(), 2.5);
  setenv("KBVQA_RESOLVER_RPS", "fast", 1);
  EXPECT_THROW(ResolverRateFromEnv(), Error);
  unsetenv("KBVQA_RESOLVER_RPS");
}

class HttpLinkResolverTest : public ::testing::Test {
 protected:
  void SetUp() override {
    server_.Get("/w/api.php", [](const httplib::Request& req, httplib::Response& res) {
      const std::string q = req.get_param_value("search");
      if (q == "Top Gun") {
        res.set_content(R"(["Top Gun", ["Top Gun"], [""], ["u"]])", "application/json");
      } else if (q == "garbled") {
        res.set_content("not json", "text/plain");
      } else if (q == "error") {
        res.status = 503;
      } else {
        res.set_content(R"(["x", [], [], []])", "application/json");
      }
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  void TearDown() override {
    server_.stop();
    thread_.join();
  }

  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

TEST_F(HttpLinkResolverTest, ParsesOpensearchResponses) {
  HttpLinkResolver resolver("127.0.0.1", port_, "/w/api.php", 1000.0);
  EXPECT_EQ(resolver.Search("Top Gun"), "Top Gun");
  EXPECT_EQ(resolver.Search("nobody"), std::nullopt);
  EXPECT_THROW(resolver.Search("garbled"), TransportError);
  EXPECT_THROW(resolver.Search("error"), TransportError);
}

TEST_F(HttpLinkResolverTest, UnreachableHostIsTransportError) {
  HttpLinkResolver resolver("127.0.0.1", 1, "/w/api.php", 1000.0);
  EXPECT_THROW(resolver.Search("Top Gun"), TransportError);
}

}  // namespace
}  // namespace kbvqa
