#include <doctest.h>

#include <numeric>

#include "guesswhich/error.hpp"
#include "guesswhich/game.hpp"
#include "reference_model.hpp"
#include "support.hpp"

using namespace guesswhich;
using namespace guesswhich::game;
using testing::play_dialog;
using testing::simple_pool;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::UsageError;
}

GameSession fresh(GameConfig config = {}, int secret = 0) {
  return new_session(config, simple_pool(config.pool_size, secret), "s1", "worker", "agent");
}

GameSession finished_with_rank(int rank, const ImageId& round_guess, int n = 20) {
  GameConfig config;
  config.pool_size = n;
  auto s = play_dialog(fresh(config), round_guess);
  // secret is img000; guess rank-1 wrong images first
  for (int i = 1; i < rank; ++i) s = apply_event(s, {FinalGuess{testing::image_name("img", i)}, 100 + i});
  return apply_event(s, {FinalGuess{"img000"}, 200});
}

}  // namespace

TEST_CASE("new session starts awaiting the caption guess") {
  auto s = fresh();
  CHECK(s.phase == Phase::AwaitingCaptionGuess);
  CHECK(s.rounds.empty());
  CHECK(s.final_guesses.empty());
  CHECK_FALSE(s.induced_rank);
  CHECK(s.state_label() == "AwaitingCaptionGuess");
}

TEST_CASE("new session rejects a pool of the wrong size") {
  GameConfig config;
  CHECK(code_of([&] { new_session(config, simple_pool(19), "s", "w", "a"); }) == ErrorCode::PoolMismatch);
}

TEST_CASE("without a caption guess the dialog starts immediately") {
  GameConfig config;
  config.caption_guess_required = false;
  auto s = fresh(config);
  CHECK(s.state_label() == "Dialog(1)/AwaitingQuestion");
  CHECK_FALSE(is_legal(s, {CaptionGuess{"img000"}, 1}));
}

TEST_CASE("four wrong final guesses then the secret gives rank 5") {
  auto s = play_dialog(fresh(), "img003");
  REQUIRE(s.phase == Phase::FinalGuessing);
  for (int i = 1; i <= 4; ++i) s = apply_event(s, {FinalGuess{testing::image_name("img", i)}, 50});
  CHECK(s.phase == Phase::FinalGuessing);
  s = apply_event(s, {FinalGuess{"img000"}, 60});
  CHECK(s.phase == Phase::Complete);
  CHECK(s.induced_rank == 5);
}

TEST_CASE("final guess before the final phase is illegal") {
  auto s = fresh();
  CHECK(code_of([&] { apply_event(s, {FinalGuess{"img001"}, 1}); }) == ErrorCode::IllegalTransition);
}

TEST_CASE("a correct caption guess does not end the game") {
  auto s = apply_event(fresh(), {CaptionGuess{"img000"}, 1});
  CHECK(s.state_label() == "Dialog(1)/AwaitingQuestion");
  s = play_dialog(fresh(), "img000");
  CHECK(s.phase == Phase::FinalGuessing);
  CHECK(s.rounds.size() == 9);
  CHECK(s.round_guesses().size() == 10);
}

TEST_CASE("event errors name the offense and leave the session unchanged") {
  auto s = apply_event(fresh(), {CaptionGuess{"img000"}, 1});
  const auto before = s;
  CHECK(code_of([&] { apply_event(s, {RoundGuess{"img001"}, 2}); }) == ErrorCode::IllegalTransition);
  CHECK(code_of([&] { apply_event(s, {QuestionAsked{"  "}, 2}); }) == ErrorCode::EmptyText);
  s = apply_event(s, {QuestionAsked{"what?"}, 2});
  CHECK(code_of([&] { apply_event(s, {AnswerReceived{""}, 3}); }) == ErrorCode::EmptyText);
  s = apply_event(s, {AnswerReceived{"yes"}, 3});
  CHECK(code_of([&] { apply_event(s, {RoundGuess{"nope"}, 4}); }) == ErrorCode::UnknownImage);
  CHECK(before.rounds.empty());
  try {
    apply_event(s, {QuestionAsked{"again?"}, 4});
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("QuestionAsked") != std::string::npos);
    CHECK(std::string(e.what()).find("Dialog(1)/AwaitingRoundGuess") != std::string::npos);
  }
}

TEST_CASE("repeated final guess is rejected") {
  auto s = play_dialog(fresh(), "img001");
  s = apply_event(s, {FinalGuess{"img001"}, 1});
  CHECK(code_of([&] { apply_event(s, {FinalGuess{"img001"}, 2}); }) == ErrorCode::DuplicateFinalGuess);
}

TEST_CASE("complete session holds every round with question, answer and guess") {
  auto s = finished_with_rank(3, "img002");
  REQUIRE(s.is_complete());
  REQUIRE(s.rounds.size() == 9);
  for (int i = 0; i < 9; ++i) {
    CHECK(s.rounds[i].index == i + 1);
    CHECK_FALSE(s.rounds[i].question.empty());
    CHECK_FALSE(s.rounds[i].answer.empty());
    CHECK_FALSE(s.rounds[i].round_guess.empty());
  }
  CHECK(s.final_guesses.back().image_id == s.pool.secret_id);
  CHECK(s.induced_rank == static_cast<int>(s.final_guesses.size()));
}

TEST_CASE("induce_final_rank") {
  CHECK(induce_final_rank({"s"}, "s") == 1);
  CHECK(induce_final_rank({"a", "b", "c", "d", "s"}, "s") == 5);
  CHECK(code_of([] { induce_final_rank({"a", "s", "b"}, "s"); }) == ErrorCode::SecretNotTerminal);
  CHECK(code_of([] { induce_final_rank({}, "s"); }) == ErrorCode::SecretNotTerminal);
}

TEST_CASE("payout saturates and floors") {
  BonusConfig bonus;
  Assignment best{"a1", "w", "c", 10, {}, {}};
  Assignment worst{"a2", "w", "c", 10, {}, {}};
  for (int i = 0; i < 10; ++i) {
    best.games.push_back(finished_with_rank(1, "img000"));
    worst.games.push_back(finished_with_rank(20, "img005"));
  }
  auto p = compute_payout(best, bonus);
  CHECK(p.base == doctest::Approx(5.0));
  CHECK(p.round_bonus == doctest::Approx(1.0));
  CHECK(p.rank_bonus == doctest::Approx(2.0));
  CHECK(p.total() == doctest::Approx(8.0));
  auto q = compute_payout(worst, bonus);
  CHECK(q.round_bonus == 0.0);
  CHECK(q.rank_bonus == 0.0);
  CHECK(q.total() == doctest::Approx(5.0));
}

TEST_CASE("payout with half the round guesses correct and every rank 5") {
  // Caption guess plus 9 round guesses per game; alternate games all right / all wrong.
  Assignment a{"a", "w", "c", 10, {}, {}};
  for (int i = 0; i < 10; ++i) a.games.push_back(finished_with_rank(5, i % 2 == 0 ? "img000" : "img007"));
  auto p = compute_payout(a, {});
  CHECK(p.round_bonus == doctest::Approx(0.50).epsilon(1e-12));
  CHECK(p.rank_bonus == doctest::Approx(2.0 * 15.0 / 19.0).epsilon(1e-12));
}

TEST_CASE("payout requires a complete assignment") {
  Assignment a{"a", "w", "c", 10, {}, {}};
  for (int i = 0; i < 9; ++i) a.games.push_back(finished_with_rank(2, "img000"));
  CHECK(code_of([&] { compute_payout(a, {}); }) == ErrorCode::IncompleteAssignment);
  a.games.push_back(play_dialog(fresh(), "img000"));
  CHECK(code_of([&] { compute_payout(a, {}); }) == ErrorCode::IncompleteAssignment);
}

TEST_CASE("caption guess can be left out of the round bonus") {
  BonusConfig bonus;
  bonus.count_caption_guess = false;
  Assignment a{"a", "w", "c", 1, {}, {}};
  auto s = fresh();
  s = apply_event(s, {CaptionGuess{"img000"}, 1});
  for (int r = 1; r <= 9; ++r) {
    s = apply_event(s, {QuestionAsked{"q"}, 1});
    s = apply_event(s, {AnswerReceived{"a"}, 1});
    s = apply_event(s, {RoundGuess{r <= 3 ? "img000" : "img001"}, 1});
  }
  s = apply_event(s, {FinalGuess{"img000"}, 1});
  a.games.push_back(s);
  CHECK(compute_payout(a, bonus).round_bonus == doctest::Approx(3.0 / 9.0));
  CHECK(compute_payout(a, {}).round_bonus == doctest::Approx(4.0 / 10.0));
}

TEST_CASE("payout is monotone in ranks and matched guesses") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    Assignment a{"a", "w", "c", 4, {}, {}};
    std::vector<int> ranks;
    for (int i = 0; i < 4; ++i) {
      ranks.push_back(1 + static_cast<int>(rng.uniform_index(20)));
      a.games.push_back(finished_with_rank(ranks.back(), "img009"));
    }
    const auto base = compute_payout(a, {});
    const auto k = rng.uniform_index(4);
    if (ranks[k] > 1) {
      auto better = a;
      better.games[k] = finished_with_rank(ranks[k] - 1, "img009");
      CHECK(compute_payout(better, {}).rank_bonus >= base.rank_bonus);
    }
    auto matched = a;
    matched.games[k] = finished_with_rank(ranks[k], "img000");
    CHECK(compute_payout(matched, {}).round_bonus >= base.round_bonus);
  }
}

TEST_CASE("per-game bonus shares add up to the assignment bonus") {
  Assignment a{"a", "w", "c", 10, {}, {}};
  double shares = 0.0;
  for (int i = 0; i < 10; ++i) {
    a.games.push_back(finished_with_rank(1 + i, i % 3 == 0 ? "img000" : "img004"));
    shares += game_bonus_share(a.games.back(), 10, {});
  }
  const auto p = compute_payout(a, {});
  CHECK(shares == doctest::Approx(p.round_bonus + p.rank_bonus).epsilon(1e-12));
}

TEST_CASE("bonus config rejects negative amounts") {
  BonusConfig b;
  b.rank_bonus_cap = -1;
  CHECK(code_of([&] { b.validate(); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("random event streams agree with the reference model") {
  Rng rng(2024);
  GameConfig config;
  config.pool_size = 6;
  config.dialog_rounds = 3;
  for (int trial = 0; trial < 500; ++trial) {
    auto s = new_session(config, simple_pool(6, static_cast<int>(rng.uniform_index(6))), "s", "w", "a");
    testing::ModelState model;
    model.rounds = 3;
    model.pool = {s.pool.image_ids.begin(), s.pool.image_ids.end()};
    model.secret = s.pool.secret_id;
    for (int i = 0; i < 40 && !s.is_complete(); ++i) {
      const auto id = testing::image_name("img", static_cast<int>(rng.uniform_index(7)));  // img006 is foreign
      EventPayload e;
      switch (rng.uniform_index(5)) {
        case 0: e = CaptionGuess{id}; break;
        case 1: e = QuestionAsked{rng.uniform_index(6) == 0 ? " " : "q?"}; break;
        case 2: e = AnswerReceived{"yes"}; break;
        case 3: e = RoundGuess{id}; break;
        default: e = FinalGuess{id}; break;
      }
      auto probe = model;
      const bool expected = probe.step(e);
      REQUIRE(is_legal(s, {e, i}) == expected);
      if (expected) {
        s = apply_event(s, {e, i});
        model = probe;
      }
      REQUIRE(s.state_label() == model.label());
    }
  }
}
