#include <doctest.h>

#include <map>
#include <thread>

#include "guesswhich/error.hpp"
#include "guesswhich/game_log.hpp"
#include "guesswhich/http_agent.hpp"
#include "guesswhich/questioner.hpp"
#include "guesswhich/simulation.hpp"
#include "support.hpp"

using namespace guesswhich;
using namespace guesswhich::agents;

namespace {

std::shared_ptr<const AttributeTable> person_table() {
  return std::make_shared<const AttributeTable>(std::unordered_map<ImageId, std::set<std::string>>{
      {"img000", {"person", "Traffic Light"}}, {"img001", {"dog"}}, {"img002", {}}});
}

AnswerRequest ask(const std::string& question, const ImageId& secret = "img000", std::size_t history = 0) {
  AnswerRequest r;
  r.session_id = "s";
  r.caption = "cap";
  r.question = question;
  r.secret_image_ref = secret;
  for (std::size_t i = 0; i < history; ++i) r.history.push_back({"q", "a"});
  return r;
}

class SleepyAgent final : public AnswerAgent {
 public:
  explicit SleepyAgent(std::chrono::milliseconds delay) : delay_(delay) {}
  AnswerResponse answer(const AnswerRequest& req) override {
    std::this_thread::sleep_for(delay_);
    return {req.session_id, "late", {}};
  }
  std::string name() const override { return "sleepy"; }

 private:
  std::chrono::milliseconds delay_;
};

class FailingAgent final : public AnswerAgent {
 public:
  AnswerResponse answer(const AnswerRequest&) override { throw Error(ErrorCode::AgentUnavailable, "down"); }
  std::string name() const override { return "failing"; }
};

/// Runs an AgentHttpServer on a free port for the scope of the object.
class ServedAgent {
 public:
  explicit ServedAgent(std::shared_ptr<AnswerAgent> agent) : server_(std::move(agent)) {
    port_ = server_.bind("127.0.0.1", 0);
    thread_ = std::thread([this] { server_.listen(); });
  }
  ~ServedAgent() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  AgentHttpServer server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST_CASE("scripted answerer looks questions up after normalizing") {
  auto agent = make_baseline_answerer(ScriptedSpec{{{"is it indoors?", "yes"}}});
  CHECK(agent->answer(ask("is it indoors?")).answer == "yes");
  CHECK(agent->answer(ask("  Is it INDOORS ")).answer == "yes");
  CHECK(agent->answer(ask("is it outdoors?")).answer == "I can't tell.");
  CHECK(agent->answer(ask("x")).session_id == "s");
}

TEST_CASE("truthful answerer reads the secret's attributes") {
  auto agent = make_baseline_answerer(TruthfulSpec{person_table()});
  CHECK(agent->answer(ask("is there a person?")).answer == "yes");
  CHECK(agent->answer(ask("Are there any people?")).answer == "I can't tell.");
  CHECK(agent->answer(ask("are there persons?")).answer == "yes");
  CHECK(agent->answer(ask("is there a dog?")).answer == "no");
  CHECK(agent->answer(ask("is there a dog?", "img001")).answer == "yes");
  CHECK(agent->answer(ask("Is there a traffic light?")).answer == "yes");
  CHECK(agent->answer(ask("what color is it?")).answer == "I can't tell.");
  CHECK_THROWS_AS(make_baseline_answerer(TruthfulSpec{nullptr}), Error);
}

TEST_CASE("noisy answerer at the extremes") {
  auto truthful = make_baseline_answerer(TruthfulSpec{person_table()});
  auto never = make_baseline_answerer(NoisySpec{TruthfulSpec{person_table()}, 0.0, 1});
  auto always = make_baseline_answerer(NoisySpec{TruthfulSpec{person_table()}, 1.0, 1});
  for (const char* q : {"is there a person?", "is there a dog?", "is there a traffic light?", "how old?"}) {
    for (const char* secret : {"img000", "img001", "img002"}) {
      for (std::size_t h = 0; h < 3; ++h) {
        const auto t = truthful->answer(ask(q, secret, h)).answer;
        CHECK(never->answer(ask(q, secret, h)).answer == t);
        const auto flipped = always->answer(ask(q, secret, h)).answer;
        if (t == "yes") CHECK(flipped == "no");
        else if (t == "no") CHECK(flipped == "yes");
        else CHECK(flipped == t);
      }
    }
  }
  CHECK_THROWS_AS(make_baseline_answerer(NoisySpec{TruthfulSpec{person_table()}, 1.5, 1}), Error);
}

TEST_CASE("noisy answerer flips at about its rate and repeats itself") {
  auto noisy = make_baseline_answerer(NoisySpec{TruthfulSpec{person_table()}, 0.3, 42});
  int flips = 0;
  const int trials = 4000;
  for (int i = 0; i < trials; ++i) {
    auto req = ask("is there a person?");
    req.session_id = "s" + std::to_string(i);
    const auto a = noisy->answer(req).answer;
    CHECK(noisy->answer(req).answer == a);
    flips += a == "no";
  }
  // binomial sd is about 29; allow 4 sd
  CHECK(std::abs(flips - 0.3 * trials) < 4 * std::sqrt(trials * 0.3 * 0.7));
}

TEST_CASE("request and response wire format") {
  auto req = ask("is there a dog?", "img001", 2);
  const auto j = to_json(req);
  CHECK(j["protocol_version"] == 1);
  CHECK(answer_request_from_json(j) == req);
  AnswerResponse resp{"s", "no", std::chrono::milliseconds(12)};
  const auto back = answer_response_from_json(to_json(resp));
  CHECK(back.session_id == "s");
  CHECK(back.answer == "no");
  CHECK(back.latency.count() == 12);
  auto bad = j;
  bad["protocol_version"] = 7;
  CHECK_THROWS_AS(answer_request_from_json(bad), Error);
  CHECK_THROWS_AS(validate_request(ask(" "), 9), Error);
  CHECK_THROWS_AS(validate_request(ask("q", "img000", 9), 9), Error);
  CHECK_NOTHROW(validate_request(ask("q", "img000", 8), 9));
}

TEST_CASE("binary question grammar") {
  const std::set<std::string> vocab{"dog", "bus", "traffic light"};
  CHECK(parse_binary_question("Is there a dog?", vocab) == "dog");
  CHECK(parse_binary_question("are there any buses", vocab) == "bus");
  CHECK(parse_binary_question("is there the traffic light", vocab) == "traffic light");
  CHECK_FALSE(parse_binary_question("is it a dog?", vocab));
  CHECK_FALSE(parse_binary_question("is there", vocab));
  CHECK(tokenize("What's   up, Doc?") == std::vector<std::string>{"whats", "up", "doc"});
}

TEST_CASE("oracle questioner always ranks the secret first") {
  Rng rng(1);
  auto store = std::make_shared<const pools::EmbeddingStore>(testing::clustered_store(rng, 1, 30, 3));
  PoolSpec pool;
  pool.pool_id = "p";
  pool.image_ids = std::vector<ImageId>(store->ids().begin(), store->ids().begin() + 20);
  pool.secret_id = pool.image_ids[7];
  QuestionerPolicy policy;
  policy.kind = QuestionerKind::EmbeddingOracle;
  policy.embeddings = store;
  auto questioner = make_questioner(policy, 9);
  auto answerer = make_baseline_answerer(ScriptedSpec{});
  auto record = run_ai_ai_game(*questioner, *answerer, pool, {}, {"sess", "a", "w", "cond", 1, 0});
  CHECK(record.status == logs::GameStatus::Complete);
  CHECK(record.induced_rank == 1);
  CHECK(record.questioner == "sim:oracle");
  CHECK(logs::verify_replay(record).ok);
}

TEST_CASE("questioner policies validate their inputs") {
  QuestionerPolicy p;
  p.kind = QuestionerKind::Scripted;
  p.questions = {"a", "b"};
  CHECK_THROWS_AS(p.validate(9), Error);
  p.kind = QuestionerKind::EmbeddingOracle;
  CHECK_THROWS_AS(p.validate(9), Error);
  p.kind = QuestionerKind::AttributeSeeker;
  CHECK_THROWS_AS(p.validate(9), Error);
  CHECK_THROWS_AS(questioner_kind_from("psychic"), Error);
  CHECK(questioner_kind_from("random") == QuestionerKind::RandomGuesser);
}

TEST_CASE("random guesser final ranks look uniform") {
  SimulationPlan plan;
  plan.answerer = make_baseline_answerer(ScriptedSpec{});
  plan.pools = testing::numbered_pools(10);
  plan.games = 4000;
  plan.questioner.seed = 123;
  std::array<int, 20> counts{};
  for (const auto& g : simulate_games(plan)) ++counts[static_cast<std::size_t>(*g.induced_rank - 1)];
  double chi2 = 0.0;
  const double expected = plan.games / 20.0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 99th percentile of chi-square with 19 degrees of freedom
  CHECK(chi2 < 36.19);
}

TEST_CASE("scripted simulation is bit-identical on rerun") {
  SimulationPlan plan;
  plan.questioner.kind = QuestionerKind::Scripted;
  plan.questioner.seed = 9;
  for (int i = 0; i < 9; ++i) plan.questioner.questions.push_back("question " + std::to_string(i) + "?");
  plan.answerer = make_baseline_answerer(ScriptedSpec{{{"question 3?", "yes"}}});
  plan.pools = testing::numbered_pools(3);
  plan.games = 7;
  plan.games_per_assignment = 3;
  auto a = simulate_games(plan);
  auto b = simulate_games(plan);
  CHECK(a == b);
  REQUIRE(a.size() == 7);
  CHECK(a[3].game_index == 1);
  CHECK(a[3].assignment_id != a[2].assignment_id);
  CHECK(a[0].questioner == "sim:scripted");
}

TEST_CASE("agent failures abort the simulated game with a diagnostic") {
  auto questioner = make_questioner({}, 9);
  FailingAgent failing;
  auto record = run_ai_ai_game(*questioner, failing, testing::simple_pool(), {}, {"sess", "a", "w", "c", 1, 0});
  CHECK(record.status == logs::GameStatus::Aborted);
  CHECK(record.diagnostic.find("down") != std::string::npos);
  CHECK_FALSE(record.induced_rank);
  CHECK(logs::verify_replay(record).ok);
}

TEST_CASE("http agent round trip") {
  ServedAgent served(make_baseline_answerer(ScriptedSpec{{{"is it indoors?", "yes"}}}));
  HttpAgent client(served.url(), std::chrono::milliseconds(2000));
  auto resp = client.answer(ask("Is it indoors?"));
  CHECK(resp.answer == "yes");
  CHECK(resp.session_id == "s");
}

TEST_CASE("http agent errors map to the agent error codes") {
  {
    ServedAgent served(std::make_shared<SleepyAgent>(std::chrono::milliseconds(600)));
    HttpAgent client(served.url(), std::chrono::milliseconds(150));
    try {
      client.answer(ask("q"));
      FAIL("expected a timeout");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::AgentTimeout);
    }
  }
  {
    ServedAgent served(std::make_shared<FailingAgent>());
    HttpAgent client(served.url(), std::chrono::milliseconds(1000));
    try {
      client.answer(ask("q"));
      FAIL("expected unavailable");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::AgentUnavailable);
    }
  }
  HttpAgent nowhere("http://127.0.0.1:1", std::chrono::milliseconds(200));
  CHECK_THROWS_AS(nowhere.answer(ask("q")), Error);
}
