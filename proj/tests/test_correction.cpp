#include <doctest.h>

#include <cstdlib>
#include <httplib.h>
#include <mutex>
#include <thread>

#include "ger/align.hpp"
#include "ger/correction.hpp"
#include "ger/digest.hpp"
#include "ger/error.hpp"
#include "support.hpp"

using namespace ger;
using test::TempDir;

namespace {

std::vector<NBestList> lists(int n) {
  std::vector<NBestList> out;
  for (int i = 0; i < n; ++i) {
    NBestList l{"u" + std::to_string(i), {}};
    for (int r = 0; r < 5; ++r)
      l.hypotheses.push_back({"utt " + std::to_string(i) + " hyp " + std::to_string(r + 1), -double(r), r + 1});
    out.push_back(l);
  }
  return out;
}

std::map<std::string, std::string> refs(const std::vector<NBestList>& ls) {
  std::map<std::string, std::string> m;
  for (auto& l : ls) m[l.utt_id] = l.hypotheses[2].text;  // rank 3 is correct
  return m;
}

auto no_sleep = [](std::chrono::steady_clock::duration) {};

class FailingBackend final : public Backend {
 public:
  explicit FailingBackend(bool transient) : transient_(transient) {}
  std::string complete(const CompletionRequest&) override {
    ++calls;
    throw BackendError("always down", transient_);
  }
  std::atomic<int> calls{0};

 private:
  bool transient_;
};

// Fails the first `failures` calls, then echoes.
class FlakyBackend final : public Backend {
 public:
  explicit FlakyBackend(int failures) : left_(failures) {}
  std::string complete(const CompletionRequest& req) override {
    std::lock_guard lock(mu_);
    if (left_-- > 0) throw BackendError("busy", true);
    return req.nbest->top().text;
  }

 private:
  std::mutex mu_;
  int left_;
};

class CountingEcho final : public Backend {
 public:
  std::string complete(const CompletionRequest& req) override {
    ++calls;
    return EchoBackend().complete(req);
  }
  std::atomic<int> calls{0};
};

}  // namespace

TEST_CASE("echo returns rank 1") {
  const auto ls = lists(10);
  BackendConfig b;
  CorrectionStats st;
  CorrectionOptions o;
  o.stats = &st;
  const auto recs = correct_batch(ls, {}, b, {}, o);
  REQUIRE(recs.size() == 10);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(recs[i].utt_id == ls[i].utt_id);
    CHECK(recs[i].corrected_text == ls[i].top().text);
    CHECK(recs[i].parse_status == ParseStatus::ok);
    CHECK_FALSE(recs[i].failed());
    CHECK(recs[i].prompt_hash.size() == 64);
  }
  CHECK(st.backend_calls == 10);
  CHECK(st.failed == 0);
}

TEST_CASE("oracle returns the reference") {
  const auto ls = lists(6);
  const auto r = refs(ls);
  BackendConfig b;
  b.kind = BackendKind::mock_oracle;
  CorrectionOptions o;
  o.references = &r;
  for (auto& rec : correct_batch(ls, {}, b, {}, o)) CHECK(rec.corrected_text == r.at(rec.utt_id));
  PromptConfig sel;
  sel.mode = CorrectionMode::selection;
  for (auto& rec : correct_batch(ls, sel, b, {}, o)) {
    CHECK(rec.selected_index == 3);
    CHECK(rec.corrected_text == r.at(rec.utt_id));
  }
  CHECK_THROWS_AS(correct_batch(ls, {}, b, {}), ConfigError);
}

TEST_CASE("identity skips the backend") {
  const auto ls = lists(4);
  BackendConfig b;
  b.kind = BackendKind::identity;
  for (std::size_t i = 0; i < 4; ++i) CHECK(correct_batch(ls, {}, b, {})[i].corrected_text == ls[i].top().text);
}

TEST_CASE("too few examples fails before any request") {
  const auto ls = lists(3);
  CountingEcho echo;
  CorrectionOptions o;
  o.backend = &echo;
  PromptConfig p;
  p.shots = 3;
  std::vector<FewShotExample> ex(2, FewShotExample{{"a"}, "a"});
  CHECK_THROWS_AS(correct_batch(ls, p, {}, ex, o), ConfigError);
  CHECK(echo.calls == 0);
}

TEST_CASE("always failing backend falls back to the baseline") {
  const auto ls = lists(8);
  for (bool transient : {true, false}) {
    FailingBackend bad(transient);
    BackendConfig b;
    b.max_retries = 2;
    CorrectionStats st;
    CorrectionOptions o;
    o.backend = &bad;
    o.sleep = no_sleep;
    o.stats = &st;
    const auto recs = correct_batch(ls, {}, b, {}, o);
    for (std::size_t i = 0; i < recs.size(); ++i) {
      CHECK(recs[i].corrected_text == ls[i].top().text);
      CHECK(recs[i].failed());
      CHECK(recs[i].parse_status == ParseStatus::fallback);
    }
    CHECK(st.failed == 8);
    // transient errors use every retry, permanent ones stop at once
    CHECK(bad.calls == (transient ? 8 * 3 : 8));
  }
}

TEST_CASE("retries back off exponentially") {
  const auto ls = lists(1);
  FlakyBackend flaky(3);
  BackendConfig b;
  b.max_retries = 3;
  b.initial_backoff = std::chrono::milliseconds(100);
  std::vector<std::chrono::steady_clock::duration> waits;
  CorrectionOptions o;
  o.backend = &flaky;
  o.sleep = [&](auto d) { waits.push_back(d); };
  const auto recs = correct_batch(ls, {}, b, {}, o);
  CHECK_FALSE(recs[0].failed());
  REQUIRE(waits.size() == 3);
  CHECK(waits[0] == std::chrono::milliseconds(100));
  CHECK(waits[1] == std::chrono::milliseconds(200));
  CHECK(waits[2] == std::chrono::milliseconds(400));
}

TEST_CASE("cache: warm rerun offline gives identical records") {
  TempDir d;
  const auto ls = lists(10);
  BackendConfig b;
  b.cache_dir = (d / "cache").string();
  CountingEcho echo;
  CorrectionOptions o;
  o.backend = &echo;
  const auto first = correct_batch(ls, {}, b, {}, o);
  CHECK(echo.calls == 10);
  b.offline = true;
  CorrectionStats st;
  o.stats = &st;
  const auto second = correct_batch(ls, {}, b, {}, o);
  CHECK(echo.calls == 10);
  CHECK(st.cache_hits == 10);
  CHECK(first == second);
}

TEST_CASE("cache: mock backends do not share answers") {
  TempDir d;
  const auto ls = lists(3);
  const auto r = refs(ls);
  BackendConfig b;
  b.cache_dir = (d / "cache").string();
  correct_batch(ls, {}, b, {});
  b.kind = BackendKind::mock_oracle;
  CorrectionOptions o;
  o.references = &r;
  for (auto& rec : correct_batch(ls, {}, b, {}, o)) CHECK(rec.corrected_text == r.at(rec.utt_id));
}

TEST_CASE("cache: offline miss is a failed record") {
  TempDir d;
  BackendConfig b;
  b.cache_dir = (d / "cache").string();
  b.offline = true;
  const auto ls = lists(2);
  const auto recs = correct_batch(ls, {}, b, {});
  CHECK(recs[0].failed());
  CHECK(recs[0].corrected_text == ls[0].top().text);
}

TEST_CASE("cache: resume after an interruption") {
  TempDir d;
  const auto ls = lists(10);
  BackendConfig b;
  b.cache_dir = (d / "cache").string();
  CountingEcho echo;
  CorrectionOptions o;
  o.backend = &echo;
  correct_batch(std::span(ls).first(5), {}, b, {}, o);
  CHECK(echo.calls == 5);
  CorrectionStats st;
  o.stats = &st;
  correct_batch(ls, {}, b, {}, o);
  CHECK(echo.calls == 10);
  CHECK(st.cache_hits == 5);
  CHECK(st.backend_calls == 5);
}

TEST_CASE("cache key covers model, temperature and prompt") {
  const auto k = ResponseCache::key("m", 0.0, "p");
  CHECK(k.size() == 64);
  CHECK(k != ResponseCache::key("m2", 0.0, "p"));
  CHECK(k != ResponseCache::key("m", 0.7, "p"));
  CHECK(k != ResponseCache::key("m", 0.0, "q"));
  TempDir d;
  ResponseCache c(d / "c");
  CHECK_FALSE(c.get(k).has_value());
  c.put(k, "m", 0.0, "hello");
  CHECK(c.get(k) == "hello");
  std::ofstream(d / "c" / (k + ".json")) << "{trunc";
  CHECK_FALSE(c.get(k).has_value());
  CHECK_FALSE(ResponseCache("").get(k).has_value());
}

TEST_CASE("digest") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("output order survives parallel completion") {
  const auto ls = lists(40);
  BackendConfig b;
  b.max_in_flight = 8;
  const auto recs = correct_batch(ls, {}, b, {});
  for (std::size_t i = 0; i < ls.size(); ++i) CHECK(recs[i].utt_id == ls[i].utt_id);
}

TEST_CASE("rate limiter spaces requests") {
  using C = RateLimiter::Clock;
  C::time_point now{};
  std::vector<C::duration> waits;
  RateLimiter rl(120.0, [&](C::duration d) { waits.push_back(d); now += d; }, [&] { return now; });
  for (int i = 0; i < 4; ++i) rl.acquire();
  REQUIRE(waits.size() == 3);
  for (auto w : waits) CHECK(w == std::chrono::milliseconds(500));
  RateLimiter off(0.0, [&](C::duration) { FAIL("uncapped limiter slept"); });
  off.acquire();
  off.acquire();
}

TEST_CASE("config validation") {
  BackendConfig b;
  b.max_in_flight = 0;
  CHECK_THROWS_AS(validate(b), ConfigError);
  b = {};
  b.kind = BackendKind::http_chat;
  CHECK_THROWS_AS(validate(b), ConfigError);
  CHECK(parse_backend_kind("mock_oracle") == BackendKind::mock_oracle);
  CHECK_THROWS_AS(parse_backend_kind("gpt"), ConfigError);
}

TEST_CASE("http backend against a local gateway") {
  httplib::Server srv;
  std::mutex mu;
  std::vector<nlohmann::json> bodies;
  std::vector<std::string> auth;
  int hits = 0;
  srv.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(mu);
    ++hits;
    bodies.push_back(nlohmann::json::parse(req.body));
    auth.push_back(req.get_header_value("Authorization"));
    if (hits == 1) {
      res.status = 503;
      return;
    }
    if (hits == 2) {
      res.status = 429;
      return;
    }
    const nlohmann::json reply{{"choices", {{{"message", {{"role", "assistant"}, {"content", "```\nde wiene\n```"}}}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  srv.Post("/bad", [](const httplib::Request&, httplib::Response& res) {
    res.status = 400;
    res.set_content("nope", "text/plain");
  });
  const int port = srv.bind_to_any_port("127.0.0.1");
  std::thread t([&] { srv.listen_after_bind(); });
  srv.wait_until_ready();

  ::setenv("GER_TEST_KEY", "sekret", 1);
  BackendConfig b;
  b.kind = BackendKind::http_chat;
  b.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
  b.model_name = "test-model";
  b.temperature = 0.0;
  b.api_key_env = "GER_TEST_KEY";
  b.max_in_flight = 1;
  std::vector<std::chrono::steady_clock::duration> waits;
  CorrectionOptions o;
  o.sleep = [&](auto d) { waits.push_back(d); };
  const auto ls = lists(1);
  const auto recs = correct_batch(ls, {}, b, {}, o);
  CHECK(recs[0].corrected_text == "de wiene");
  CHECK_FALSE(recs[0].failed());
  CHECK(hits == 3);
  CHECK(waits.size() == 2);
  REQUIRE(bodies.size() == 3);
  CHECK(bodies[0]["model"] == "test-model");
  CHECK(bodies[0]["temperature"] == 0.0);
  CHECK(bodies[0]["messages"][0]["role"] == "user");
  CHECK(bodies[0]["messages"][0]["content"].get<std::string>().find("utt 0 hyp 1") != std::string::npos);
  CHECK(auth[0] == "Bearer sekret");

  b.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/bad";
  HttpChatBackend bad(b);
  try {
    bad.complete({"x", CorrectionMode::generation, nullptr, nullptr});
    FAIL("expected BackendError");
  } catch (const BackendError& e) {
    CHECK_FALSE(e.transient());
  }
  srv.stop();
  t.join();

  // nothing listening any more
  b.request_timeout = std::chrono::seconds(1);
  HttpChatBackend gone(b);
  try {
    gone.complete({"x", CorrectionMode::generation, nullptr, nullptr});
    FAIL("expected BackendError");
  } catch (const BackendError& e) {
    CHECK(e.transient());
  }
}
