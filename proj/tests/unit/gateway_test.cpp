#include <atomic>
#include <cstdlib>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "schemaloop/error.hpp"
#include "schemaloop/llm/gateway.hpp"
#include "support.hpp"

using namespace schemaloop;
using namespace schemaloop::llm;
using nlohmann::json;

namespace {

const std::string kBeforePrompt = "List the events before an attack: 1.";
const std::string kBeforeCompletion =
    "The attacker gathers information about the target.\n2. The attacker plans the attack.\n3. The attacker gains "
    "access to the target system.\n4. The attacker executes the attack.\n5. The attacker covers their tracks.";

CompletionRequest req(const std::string& prompt) {
  CompletionRequest r;
  r.prompt = prompt;
  return r;
}

// Minimal OpenAI-style completions endpoint on a loopback port.
class MockCompletions {
 public:
  explicit MockCompletions(httplib::Server::Handler handler) {
    server_.Post("/v1/completions", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockCompletions() {
    server_.stop();
    thread_.join();
  }
  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST(CompletionRequest, ValidateRejectsBadFields) {
  EXPECT_THROW(validate(req("")), InvalidRequest);
  auto r = req("x");
  r.max_tokens = 0;
  EXPECT_THROW(validate(r), InvalidRequest);
  r = req("x");
  r.temperature = 2.5;
  EXPECT_THROW(validate(r), InvalidRequest);
  EXPECT_NO_THROW(validate(req("x")));
}

TEST(CompletionRequest, StopSequencesCutAtEarliest) {
  EXPECT_EQ(strip_stop_sequences("a\n\nb###c", {"###", "\n\n"}), "a");
  EXPECT_EQ(strip_stop_sequences("abc", {}), "abc");
  EXPECT_EQ(strip_stop_sequences("abc", {"zz"}), "abc");
}

TEST(ScriptedProvider, ReplaysExactPromptCompletion) {
  ScriptedProvider p({{kBeforePrompt, {kBeforeCompletion}}}, KeyMode::ExactPrompt);
  auto result = p.complete(req(kBeforePrompt));
  EXPECT_EQ(result.text, kBeforeCompletion);
  EXPECT_EQ(result.provider_id, "scripted");
}

TEST(ScriptedProvider, EmptyScriptFails) {
  ScriptedProvider p({});
  try {
    p.complete(req("anything"));
    FAIL() << "expected ProviderError";
  } catch (const ProviderError& e) {
    EXPECT_STREQ(e.what(), "no scripted completion");
  }
}

TEST(ScriptedProvider, DigestKeysTolerateWhitespaceDrift) {
  ScriptedProvider p(ScriptedProvider::Script{{kBeforePrompt, {"ok"}}});
  EXPECT_EQ(p.complete(req("  List the events   before an attack:\n1.")).text, "ok");
}

TEST(ScriptedProvider, DigestKeysMayBeGivenPrecomputed) {
  ScriptedProvider p(ScriptedProvider::Script{{prompt_digest_key(kBeforePrompt), {"ok"}}});
  EXPECT_EQ(p.complete(req(kBeforePrompt)).text, "ok");
  EXPECT_EQ(prompt_digest_key("a  b"), prompt_digest_key("a b"));
  EXPECT_EQ(prompt_digest_key("a b").rfind("digest:", 0), 0u);
}

TEST(ScriptedProvider, QueueConsumedInOrder) {
  ScriptedProvider p({{"p", {"first", "second"}}});
  EXPECT_EQ(p.remaining(), 2u);
  EXPECT_EQ(p.complete(req("p")).text, "first");
  EXPECT_EQ(p.complete(req("p")).text, "second");
  EXPECT_EQ(p.remaining(), 0u);
  EXPECT_THROW(p.complete(req("p")), ProviderError);
}

TEST(ScriptedProvider, AppliesStopSequencesOnly) {
  ScriptedProvider p(ScriptedProvider::Script{{"p", {"  keep  spacing\nEND tail"}}});
  auto r = req("p");
  r.stop_sequences = {"END"};
  EXPECT_EQ(p.complete(r).text, "  keep  spacing\n");
}

TEST(ScriptedProvider, OutputIsAFunctionOfThePromptSequence) {
  testsupport::Rng rng(7);
  ScriptedProvider::Script script;
  for (int k = 0; k < 5; ++k)
    for (int i = 0; i < 6; ++i) script["k" + std::to_string(k)].push_back(std::to_string(rng() % 1000));
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::string> prompts;
    for (int i = 0; i < 12; ++i) prompts.push_back("k" + std::to_string(rng() % 5));
    ScriptedProvider a(script), b(script);
    for (const auto& prompt : prompts) {
      std::string ta, tb;
      try {
        ta = a.complete(req(prompt)).text;
      } catch (const ProviderError&) {
        ta = "<none>";
      }
      try {
        tb = b.complete(req(prompt)).text;
      } catch (const ProviderError&) {
        tb = "<none>";
      }
      ASSERT_EQ(ta, tb);
    }
  }
}

TEST(ScriptedProvider, MalformedScriptsRejected) {
  EXPECT_THROW(ScriptedProvider::from_json(json::array()), MalformedScriptFile);
  EXPECT_THROW(ScriptedProvider::from_json(json{{"p", "not a list"}}), MalformedScriptFile);
  EXPECT_THROW(ScriptedProvider::from_json(json{{"p", {1, 2}}}), MalformedScriptFile);
  EXPECT_THROW(ScriptedProvider::from_file("/nonexistent/script.json"), MalformedScriptFile);
}

TEST(ProviderConfig, ScriptedPathResolvesAgainstConfigDir) {
  auto cfg = ProviderConfig::from_file(testsupport::fixture("case_study/provider.json"));
  EXPECT_EQ(cfg.kind, "scripted");
  EXPECT_EQ(cfg.script_path, testsupport::fixture("case_study/script.json"));
  EXPECT_EQ(cfg.key_mode, KeyMode::PromptDigest);
}

TEST(ProviderConfig, StageOverridesInheritDefaults) {
  auto cfg = ProviderConfig::from_json(
      json{{"kind", "scripted"}, {"temperature", 0.5}, {"stages", {{"relation-question", {{"max_tokens", 4}}}}}});
  EXPECT_DOUBLE_EQ(cfg.decoding_for("step-generation").temperature, 0.5);
  EXPECT_EQ(cfg.decoding_for("step-generation").max_tokens, 256);
  EXPECT_DOUBLE_EQ(cfg.decoding_for("relation-question").temperature, 0.5);
  EXPECT_EQ(cfg.decoding_for("relation-question").max_tokens, 4);
}

TEST(ProviderConfig, BadDocumentsAreConfigErrors) {
  EXPECT_THROW(ProviderConfig::from_json(json::array()), ConfigError);
  EXPECT_THROW(ProviderConfig::from_json(json{{"temperature", 1}}), ConfigError);
  EXPECT_THROW(ProviderConfig::from_json(json{{"kind", "scripted"}, {"key_mode", "fuzzy"}}), ConfigError);
  EXPECT_THROW(ProviderConfig::from_file("/nonexistent/provider.json"), ConfigError);
}

TEST(ResolveProvider, ScriptedFixtureReplaysCaseStudy) {
  auto provider = resolve_provider(ProviderConfig::from_file(testsupport::fixture("case_study/provider.json")));
  auto result = provider->complete(req("List the sub-events involved in cyber attack: 1."));
  EXPECT_NE(result.text.find("gains initial access"), std::string::npos);
}

TEST(ResolveProvider, LiveWithoutKeyIsMissingCredential) {
  ProviderConfig cfg;
  cfg.kind = "live";
  cfg.api_key_env = "SCHEMALOOP_TEST_UNSET_KEY";
  ::unsetenv("SCHEMALOOP_TEST_UNSET_KEY");
  EXPECT_THROW(resolve_provider(cfg), MissingCredential);
}

TEST(ResolveProvider, UnknownKind) {
  ProviderConfig cfg;
  cfg.kind = "telepathy";
  EXPECT_THROW(resolve_provider(cfg), UnknownProviderKind);
}

TEST(ResolveProvider, ScriptedWithoutPath) {
  ProviderConfig cfg;
  cfg.kind = "scripted";
  EXPECT_THROW(resolve_provider(cfg), MalformedScriptFile);
}

TEST(HttpProvider, SendsCompletionRequestAndStripsStops) {
  json seen;
  std::string auth;
  MockCompletions mock([&](const httplib::Request& r, httplib::Response& res) {
    seen = json::parse(r.body);
    auth = r.get_header_value("Authorization");
    res.set_content(json{{"choices", {{{"text", " Before\nEvent"}}}}}.dump(), "application/json");
  });
  HttpProvider p({mock.base_url(), "sk-test", "model-x", 3, 1, 2000});
  auto r = req("question");
  r.temperature = 0.0;
  r.max_tokens = 8;
  r.stop_sequences = {"\n"};
  auto result = p.complete(r);
  EXPECT_EQ(result.text, " Before");
  EXPECT_EQ(auth, "Bearer sk-test");
  EXPECT_EQ(seen["prompt"], "question");
  EXPECT_EQ(seen["model"], "model-x");
  EXPECT_EQ(seen["max_tokens"], 8);
  EXPECT_EQ(seen["temperature"], 0.0);
  EXPECT_EQ(seen["stop"], json::array({"\n"}));
  EXPECT_EQ(result.provider_id, "live:" + mock.base_url());
}

TEST(HttpProvider, ProviderErrorSurfacesWithoutRetry) {
  std::atomic<int> calls{0};
  MockCompletions mock([&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 429;
    res.set_content(R"({"error":{"message":"rate limited"}})", "application/json");
  });
  HttpProvider p({mock.base_url(), "sk-test", "m", 3, 1, 2000});
  try {
    p.complete(req("q"));
    FAIL() << "expected ProviderError";
  } catch (const ProviderError& e) {
    EXPECT_NE(std::string(e.what()).find("rate limited"), std::string::npos);
  }
  EXPECT_EQ(calls.load(), 1);
}

TEST(HttpProvider, MalformedPayloadIsProviderError) {
  MockCompletions mock([](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"choices": []})", "application/json");
  });
  HttpProvider p({mock.base_url(), "sk-test", "m", 3, 1, 2000});
  EXPECT_THROW(p.complete(req("q")), ProviderError);
}

TEST(HttpProvider, UnreachableHostExhaustsRetries) {
  HttpProvider p({"http://127.0.0.1:1/v1", "sk-test", "m", 3, 1, 500});
  try {
    p.complete(req("q"));
    FAIL() << "expected TransportError";
  } catch (const TransportError& e) {
    EXPECT_EQ(e.attempts(), 3u);
  }
}

TEST(HttpProvider, RequiresKeyAndUrl) {
  EXPECT_THROW(HttpProvider({"http://x", "", "m"}), MissingCredential);
  EXPECT_THROW(HttpProvider({"", "k", "m"}), ConfigError);
}
