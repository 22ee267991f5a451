#include "support.hpp"

#include "unac/provider.hpp"
#include "unac/provider_http.hpp"
#include "unac/provider_scripted.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <unistd.h>

namespace unac::provider {
namespace {

using testing::fast_config;
using testing::StubChatServer;

std::shared_ptr<Provider> http_provider(const std::string& id, Dialect dialect, const std::string& endpoint,
                                        std::shared_ptr<ResponseCache> cache = nullptr) {
  auto cfg = fast_config(id, dialect, endpoint);
  return std::make_shared<Provider>(cfg, make_backend(cfg), std::move(cache));
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("unac_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

TEST(ProviderConfig, ValidateNamesBadField) {
  auto c = fast_config("p", Dialect::kOpenAiCompat, "http://x");
  EXPECT_NO_THROW(validate(c));
  c.temperature = 3.0;
  try {
    validate(c);
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
    EXPECT_NE(std::string(e.what()).find("temperature"), std::string::npos);
  }
  c = fast_config("p", Dialect::kOpenAiCompat, "");
  EXPECT_THROW(validate(c), ProviderError);
}

TEST(Scripted, KeyedResponseEchoedVerbatim) {
  auto backend = std::make_shared<ScriptedBackend>();
  Provider p(fast_config("mock", Dialect::kScripted, "-"), backend);
  const auto req = ChatRequest::user("What is shown?", {testing::solid_png(3, 3)});
  backend->add_keyed(request_digest("mock", req), "  exact\nfixture text ");
  EXPECT_EQ(p.chat(req).text, "  exact\nfixture text ");
}

TEST(Scripted, DigestIgnoresWhitespaceButNotImages) {
  const auto a = ChatRequest::user("a  b\n c");
  const auto b = ChatRequest::user("a b c");
  EXPECT_EQ(request_digest("p", a), request_digest("p", b));
  EXPECT_NE(request_digest("p", a), request_digest("q", a));
  EXPECT_NE(request_digest("p", a), request_digest("p", ChatRequest::user("a b c", {testing::solid_png(2, 2)})));
}

TEST(Scripted, LookupOrderAndMiss) {
  auto backend = std::make_shared<ScriptedBackend>();
  Provider p(fast_config("mock", Dialect::kScripted, "-"), backend);
  backend->add_rule({"alpha", "beta"}, "both");
  backend->add_rule({"alpha"}, "alpha only");
  EXPECT_EQ(p.chat(ChatRequest::user("beta alpha")).text, "both");
  EXPECT_EQ(p.chat(ChatRequest::user("alpha")).text, "alpha only");
  try {
    p.chat(ChatRequest::user("gamma"));
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kMalformedResponse);
    EXPECT_NE(std::string(e.what()).find(request_digest("mock", ChatRequest::user("gamma"))), std::string::npos);
  }
  backend->set_default("fallback");
  EXPECT_EQ(p.chat(ChatRequest::user("gamma")).text, "fallback");
}

TEST(Scripted, LoadsFixtureFile) {
  const auto dir = temp_dir("fixture");
  const auto path = dir / "f.jsonl";
  const auto keyed = request_digest("m", ChatRequest::user("keyed"));
  std::ofstream(path) << "{\"key\":\"" << keyed << "\",\"response\":\"K\"}\n"
                      << "{\"contains\":[\"fail\"],\"fail_status\":401}\n"
                      << "{\"contains\":\"hello\",\"response\":\"H\"}\n"
                      << "{\"default\":\"D\"}\n";
  auto cfg = fast_config("m", Dialect::kScripted, path.string());
  Provider p(cfg, make_backend(cfg));
  EXPECT_EQ(p.chat(ChatRequest::user("keyed")).text, "K");
  EXPECT_EQ(p.chat(ChatRequest::user("say hello")).text, "H");
  EXPECT_EQ(p.chat(ChatRequest::user("other")).text, "D");
  try {
    p.chat(ChatRequest::user("fail now"));
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kAuth);
  }
  std::ofstream(dir / "bad.jsonl") << "{\"response\":\"x\"}\n";
  EXPECT_THROW(ScriptedBackend::load(dir / "bad.jsonl"), ProviderError);
}

TEST(Chat, ZeroMessagesIsPreconditionViolation) {
  Provider p(fast_config("mock", Dialect::kScripted, "-"), std::make_shared<ScriptedBackend>());
  try {
    p.chat(ChatRequest{});
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kPrecondition);
  }
}

TEST(Chat, TwoSystemMessagesRejected) {
  Provider p(fast_config("mock", Dialect::kScripted, "-"), std::make_shared<ScriptedBackend>());
  ChatRequest req;
  req.messages = {ChatMessage{Role::kSystem, {ContentPart::text_part("a")}},
                  ChatMessage{Role::kSystem, {ContentPart::text_part("b")}}};
  EXPECT_THROW(p.chat(req), ProviderError);
}

TEST(OpenAiCompat, RetriesRateLimitThenSucceeds) {
  StubChatServer server([](const nlohmann::json&) { return "B"; });
  server.push_status(429);
  server.push_status(429);
  auto p = http_provider("oa", Dialect::kOpenAiCompat, server.endpoint());
  std::vector<Attempt> attempts;
  EXPECT_EQ(p->chat(ChatRequest::user("pick"), &attempts).text, "B");
  ASSERT_EQ(attempts.size(), 3u);
  EXPECT_EQ(attempts[0].http_status, 429);
  EXPECT_EQ(attempts[1].http_status, 429);
  EXPECT_EQ(attempts[2].http_status, 200);
  EXPECT_EQ(attempts[2].number, 3);
  EXPECT_EQ(server.hits(), 3);
}

TEST(OpenAiCompat, AuthErrorIsNotRetried) {
  StubChatServer server;
  server.push_status(401);
  auto p = http_provider("oa", Dialect::kOpenAiCompat, server.endpoint());
  std::vector<Attempt> attempts;
  try {
    p->chat(ChatRequest::user("x"), &attempts);
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kAuth);
  }
  EXPECT_EQ(server.hits(), 1);
  EXPECT_EQ(attempts.size(), 1u);
}

TEST(OpenAiCompat, ServerErrorsExhaustRetries) {
  StubChatServer server;
  for (int i = 0; i < 4; ++i) server.push_status(503);
  auto p = http_provider("oa", Dialect::kOpenAiCompat, server.endpoint());
  std::vector<Attempt> attempts;
  try {
    p->chat(ChatRequest::user("x"), &attempts);
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kServerErrorExhausted);
  }
  EXPECT_EQ(server.hits(), 4);
  EXPECT_EQ(attempts.size(), 4u);
}

TEST(OpenAiCompat, RateLimitExhaustion) {
  StubChatServer server;
  for (int i = 0; i < 4; ++i) server.push_status(429);
  auto p = http_provider("oa", Dialect::kOpenAiCompat, server.endpoint());
  try {
    p->chat(ChatRequest::user("x"));
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kRateLimitedExhausted);
  }
}

TEST(OpenAiCompat, UnreachableServerExhaustsAsTimeout) {
  auto cfg = fast_config("oa", Dialect::kOpenAiCompat, testing::closed_endpoint());
  cfg.max_retries = 1;
  Provider p(cfg, make_backend(cfg));
  try {
    p.chat(ChatRequest::user("x"));
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kTimeoutExhausted);
  }
}

TEST(OpenAiCompat, RequestShapeAndBearerAuth) {
  ::setenv("UNAC_TEST_KEY", "sekret", 1);
  StubChatServer server;
  auto cfg = fast_config("oa", Dialect::kOpenAiCompat, server.endpoint() + "/v1/");
  cfg.api_key_env = "UNAC_TEST_KEY";
  Provider p(cfg, make_backend(cfg));
  const auto img = testing::solid_png(2, 2);
  const auto resp = p.chat(ChatRequest::user("describe", {img}));
  EXPECT_EQ(resp.text, "ok");
  ASSERT_TRUE(resp.usage);
  EXPECT_EQ(resp.usage->total_tokens, 12);
  ASSERT_EQ(server.paths().size(), 1u);
  EXPECT_EQ(server.paths()[0], "/v1/chat/completions");
  EXPECT_EQ(server.headers()[0].at("Authorization"), "Bearer sekret");
  const auto body = server.bodies()[0];
  EXPECT_EQ(body["model"], "test-model");
  EXPECT_EQ(body["temperature"], 0.0);
  const auto& parts = body["messages"][0]["content"];
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_EQ(parts[0]["type"], "image_url");
  EXPECT_EQ(parts[0]["image_url"]["url"].get<std::string>().rfind("data:image/png;base64,", 0), 0u);
  EXPECT_EQ(parts[1]["text"], "describe");
  ::unsetenv("UNAC_TEST_KEY");
}

TEST(OpenAiCompat, MissingKeyIsAuthError) {
  ::unsetenv("UNAC_TEST_ABSENT_KEY");
  auto cfg = fast_config("oa", Dialect::kOpenAiCompat, "http://127.0.0.1:1");
  cfg.api_key_env = "UNAC_TEST_ABSENT_KEY";
  try {
    make_backend(cfg);
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kAuth);
  }
}

TEST(OpenAiCompat, MalformedBodies) {
  EXPECT_THROW(OpenAiCompatBackend::parse_body(nlohmann::json::object()), ProviderError);
  EXPECT_THROW(OpenAiCompatBackend::parse_body({{"choices", nlohmann::json::array({{{"index", 0}}})}}), ProviderError);
  const auto parts = nlohmann::json::parse(
      R"({"choices":[{"message":{"content":[{"type":"text","text":"a"},{"type":"text","text":"b"}]}}]})");
  EXPECT_EQ(OpenAiCompatBackend::parse_body(parts).text, "ab");
}

TEST(Gemini, HeaderAndQueryKeys) {
  ::setenv("UNAC_TEST_GKEY", "gk", 1);
  StubChatServer server([](const nlohmann::json&) { return "gem"; });
  auto cfg = fast_config("g", Dialect::kGeminiStyle, server.endpoint() + "/v1beta");
  cfg.api_key_env = "UNAC_TEST_GKEY";
  Provider header(cfg, make_backend(cfg));
  ChatRequest req = ChatRequest::user("look", {testing::solid_png(2, 2)});
  req.messages.insert(req.messages.begin(), ChatMessage{Role::kSystem, {ContentPart::text_part("sys")}});
  EXPECT_EQ(header.chat(req).text, "gem");
  cfg.api_key_in_query = true;
  Provider query(cfg, make_backend(cfg));
  EXPECT_EQ(query.chat(ChatRequest::user("look")).text, "gem");

  const auto paths = server.paths();
  ASSERT_EQ(paths.size(), 2u);
  EXPECT_EQ(paths[0], "/v1beta/models/test-model:generateContent");
  EXPECT_EQ(server.headers()[0].at("x-goog-api-key"), "gk");
  EXPECT_EQ(paths[1], "/v1beta/models/test-model:generateContent?key=gk");
  EXPECT_EQ(server.headers()[1].count("x-goog-api-key"), 0u);

  const auto body = server.bodies()[0];
  EXPECT_EQ(body["systemInstruction"]["parts"][0]["text"], "sys");
  ASSERT_EQ(body["contents"].size(), 1u);
  EXPECT_EQ(body["contents"][0]["parts"][0]["inline_data"]["mime_type"], "image/png");
  EXPECT_EQ(body["generationConfig"]["maxOutputTokens"], 1024);
  ::unsetenv("UNAC_TEST_GKEY");
}

TEST(Gemini, AssistantTurnsBecomeModelRole) {
  ChatRequest req = ChatRequest::user("q");
  req.messages.push_back(ChatMessage{Role::kAssistant, {ContentPart::text_part("a")}});
  const auto body = GeminiBackend::build_body(req, fast_config("g", Dialect::kGeminiStyle, "http://x"));
  EXPECT_EQ(body["contents"][1]["role"], "model");
  EXPECT_THROW(GeminiBackend::parse_body({{"candidates", nlohmann::json::array()}}), ProviderError);
}

TEST(Cache, RepeatedRequestMakesNoNetworkCall) {
  StubChatServer server([](const nlohmann::json&) { return "cached answer"; });
  const auto dir = temp_dir("cache");
  auto cache = std::make_shared<ResponseCache>(dir);
  auto p = http_provider("oa", Dialect::kOpenAiCompat, server.endpoint(), cache);
  const auto req = ChatRequest::user("same", {testing::solid_png(4, 4)});
  const auto first = p->chat(req);
  EXPECT_FALSE(first.cached);
  EXPECT_EQ(server.hits(), 1);
  for (int i = 0; i < 3; ++i) {
    std::vector<Attempt> attempts;
    const auto again = p->chat(req, &attempts);
    EXPECT_TRUE(again.cached);
    EXPECT_EQ(again.text, "cached answer");
    EXPECT_EQ(attempts.size(), 1u);
  }
  EXPECT_EQ(server.hits(), 1);
  EXPECT_EQ(cache->hits(), 3u);

  // A fresh provider over the same directory also hits.
  auto p2 = http_provider("oa", Dialect::kOpenAiCompat, server.endpoint(), std::make_shared<ResponseCache>(dir));
  EXPECT_EQ(p2->chat(req).text, "cached answer");
  EXPECT_EQ(server.hits(), 1);
  // A different prompt misses.
  p->chat(ChatRequest::user("different"));
  EXPECT_EQ(server.hits(), 2);
  std::filesystem::remove_all(dir);
}

TEST(Backoff, StaysWithinJitterBoundsAndCap) {
  ProviderConfig c;
  c.provider_id = "p";
  std::mt19937 rng(1);
  for (int retry = 1; retry <= 8; ++retry) {
    const double nominal = std::min(1000.0 * std::pow(2.0, retry - 1), 30000.0);
    for (int i = 0; i < 50; ++i) {
      const auto d = backoff_delay(c, retry, rng).count();
      EXPECT_GE(d, std::floor(nominal * 0.8));
      EXPECT_LE(d, std::min(std::ceil(nominal * 1.2), 30000.0));
    }
  }
}

TEST(RateLimiter, SpacesBursts) {
  RateLimiter limiter(600);  // one per 100 ms
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 3; ++i) limiter.acquire();
  const auto elapsed = std::chrono::steady_clock::now() - start;
  EXPECT_GE(elapsed, std::chrono::milliseconds(190));
}

TEST(Roles, ResolveStageProvider) {
  ProviderSet set;
  for (const char* id : {"g", "l", "mock"}) {
    set.add(std::make_shared<Provider>(fast_config(id, Dialect::kScripted, "-"), std::make_shared<ScriptedBackend>()));
  }
  StageRoles roles{std::nullopt, "g", "l", "l", std::nullopt};
  EXPECT_EQ(resolve_stage_provider(roles, set, Stage::kCheck).provider_id, "l");
  EXPECT_EQ(resolve_stage_provider(roles, set, Stage::kAnalyze).provider_id, "g");
  EXPECT_EQ(resolve_stage_provider(roles, set, Stage::kAbstractLocal).provider_id, "g");
  EXPECT_EQ(resolve_stage_provider(roles, set, Stage::kDecompose).provider_id, "l");
  EXPECT_THROW(resolve_stage_provider(roles, set, Stage::kJudge), ProviderError);
  roles.analyze = "mock";
  EXPECT_EQ(resolve_stage_provider(roles, set, Stage::kAnalyze).provider_id, "mock");

  StageRoles all{"mock", "mock", "mock", "mock", "mock"};
  EXPECT_EQ(resolve_stage_provider(all, set, Stage::kConclude).provider_id, "mock");

  StageRoles bad{std::nullopt, "g", "x", "l", std::nullopt};
  try {
    validate_roles(bad, set);
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kUnknownProvider);
    EXPECT_NE(std::string(e.what()).find("'x'"), std::string::npos);
  }
}

TEST(Roles, DuplicateProviderIdRejected) {
  ProviderSet set;
  auto make = [] {
    return std::make_shared<Provider>(fast_config("p", Dialect::kScripted, "-"), std::make_shared<ScriptedBackend>());
  };
  set.add(make());
  EXPECT_THROW(set.add(make()), ProviderError);
}

TEST(Url, Parsing) {
  EXPECT_EQ(parse_url("http://h:8/a/b/").origin, "http://h:8");
  EXPECT_EQ(parse_url("http://h:8/a/b/").path, "/a/b");
  EXPECT_EQ(parse_url("https://h").path, "");
  EXPECT_THROW(parse_url("ftp://h"), ProviderError);
}

}  // namespace
}  // namespace unac::provider
