#include <cmath>
#include <cstdio>
#include <vector>

#include "doctest.h"
#include "sacd/env.hpp"
#include "sacd/mdp.hpp"

using sacd::EnvHandle;
using sacd::MdpSpec;
using sacd::Rng;

namespace {

// 99% chi-square critical values by degrees of freedom.
double chi2_99(std::size_t df) {
  switch (df) {
    case 1: return 6.634897;
    case 2: return 9.210340;
    case 3: return 11.344867;
    case 4: return 13.276704;
    case 9: return 21.665994;
    default: FAIL("no tabulated chi-square value for df"); return 0.0;
  }
}

MdpSpec four_state_test_mdp() {
  // one stochastic row to exercise sampling, deterministic elsewhere
  MdpSpec mdp;
  mdp.n_states = 4;
  mdp.n_actions = 2;
  mdp.transition.assign(4 * 2 * 4, 0.0);
  auto set_row = [&](std::size_t s, std::size_t a, std::vector<double> row) {
    for (std::size_t s2 = 0; s2 < 4; ++s2) mdp.transition[(s * 2 + a) * 4 + s2] = row[s2];
  };
  set_row(0, 0, {0.1, 0.2, 0.3, 0.4});
  set_row(0, 1, {0, 0, 0, 1});
  set_row(1, 0, {1, 0, 0, 0});
  set_row(1, 1, {0, 1, 0, 0});
  set_row(2, 0, {0, 0, 1, 0});
  set_row(2, 1, {1, 0, 0, 0});
  set_row(3, 0, {0, 0, 0, 1});
  set_row(3, 1, {0, 0, 0, 1});
  mdp.reward.assign(8, 0.0);
  mdp.reward[0 * 2 + 0] = 0.5;
  mdp.terminal = {false, false, false, true};
  for (std::size_t a = 0; a < 2; ++a) mdp.reward[3 * 2 + a] = 0.0;
  mdp.start_distribution = {1, 0, 0, 0};
  mdp.gamma = 0.9;
  mdp.validate();
  return mdp;
}

}  // namespace

TEST_CASE("MdpSpec validation catches broken specs") {
  MdpSpec mdp = four_state_test_mdp();
  CHECK_NOTHROW(mdp.validate());

  SUBCASE("non-stochastic row") {
    mdp.transition[0] += 1e-6;
    CHECK_THROWS_AS(mdp.validate(), std::invalid_argument);
  }
  SUBCASE("terminal with reward") {
    mdp.reward[3 * 2 + 1] = 0.25;
    CHECK_THROWS_AS(mdp.validate(), std::invalid_argument);
  }
  SUBCASE("terminal without self-loop") {
    mdp.transition[(3 * 2 + 0) * 4 + 3] = 0.0;
    mdp.transition[(3 * 2 + 0) * 4 + 0] = 1.0;
    CHECK_THROWS_AS(mdp.validate(), std::invalid_argument);
  }
  SUBCASE("bad start distribution") {
    mdp.start_distribution = {0.5, 0, 0, 0.4};
    CHECK_THROWS_AS(mdp.validate(), std::invalid_argument);
  }
  SUBCASE("gamma out of range") {
    mdp.gamma = 1.0;
    CHECK_THROWS_AS(mdp.validate(), std::invalid_argument);
  }
}

TEST_CASE("MdpSpec JSON round-trip is exact") {
  const MdpSpec mdp = sacd::make_two_state();
  const std::string path = "test_mdp_roundtrip.json";
  sacd::save_mdp(mdp, path);
  const MdpSpec back = sacd::load_mdp(path);
  CHECK(back.n_states == mdp.n_states);
  CHECK(back.n_actions == mdp.n_actions);
  CHECK(back.gamma == mdp.gamma);
  CHECK(back.transition == mdp.transition);
  CHECK(back.reward == mdp.reward);
  CHECK(back.terminal == mdp.terminal);
  CHECK(back.start_distribution == mdp.start_distribution);
  std::remove(path.c_str());

  CHECK_THROWS_AS(sacd::load_mdp("does_not_exist.json"), std::runtime_error);
  CHECK_THROWS_AS(sacd::mdp_from_json("{\"format\":\"other\"}"), std::runtime_error);
}

TEST_CASE("reset") {
  EnvHandle env(four_state_test_mdp());

  SUBCASE("deterministic start distribution always lands on state 0") {
    Rng rng(1);
    for (int i = 0; i < 10; ++i) {
      env.reset(rng);
      CHECK(env.state() == 0);
    }
  }

  SUBCASE("observation is the one-hot encoding") {
    Rng rng(1);
    env.reset(rng);
    CHECK(env.one_hot(2) == std::vector<double>{0, 0, 1, 0});
    CHECK(env.observation() == std::vector<double>{1, 0, 0, 0});
  }

  SUBCASE("seeded stochastic start is reproducible") {
    MdpSpec mdp = four_state_test_mdp();
    mdp.start_distribution = {0.25, 0.25, 0.5, 0.0};
    EnvHandle a(mdp), b(mdp);
    Rng ra(99), rb(99);
    for (int i = 0; i < 50; ++i) {
      a.reset(ra);
      b.reset(rb);
      CHECK(a.state() == b.state());
    }
  }
}

TEST_CASE("step") {
  SUBCASE("deterministic transition goes where P says") {
    EnvHandle env(four_state_test_mdp());
    Rng rng(1);
    env.reset(rng);
    const auto res = env.step(1, rng);  // P[0][1][3] = 1
    CHECK(env.state() == 3);
    CHECK(res.terminal);
    CHECK(res.done());
  }

  SUBCASE("action out of range and step after done error") {
    EnvHandle env(four_state_test_mdp());
    Rng rng(1);
    env.reset(rng);
    CHECK_THROWS_AS(env.step(5, rng), std::out_of_range);
    env.step(1, rng);  // reach terminal
    CHECK_THROWS_AS(env.step(0, rng), std::logic_error);
  }

  SUBCASE("truncation at the step limit is not terminal") {
    MdpSpec bandit = sacd::make_bandit({1.0, 0.0});
    EnvHandle env(bandit, 3);
    Rng rng(1);
    env.reset(rng);
    CHECK_FALSE(env.step(0, rng).done());
    CHECK_FALSE(env.step(0, rng).done());
    const auto last = env.step(0, rng);
    CHECK(last.truncated);
    CHECK_FALSE(last.terminal);
    CHECK(env.done());
  }

  SUBCASE("seeded transition frequencies sit inside the 99% chi-square band") {
    EnvHandle env(four_state_test_mdp(), 1);
    Rng rng(777);
    const std::vector<double> expected = {0.1, 0.2, 0.3, 0.4};
    std::vector<std::size_t> counts(4, 0);
    const std::size_t trials = 100000;
    for (std::size_t i = 0; i < trials; ++i) {
      env.reset(rng);
      env.step(0, rng);
      counts[env.state()] += 1;
    }
    double chi2 = 0.0;
    for (std::size_t s = 0; s < 4; ++s) {
      const double exp_count = expected[s] * static_cast<double>(trials);
      chi2 += (counts[s] - exp_count) * (counts[s] - exp_count) / exp_count;
    }
    CHECK(chi2 < chi2_99(3));
  }
}

TEST_CASE("deterministic episode return equals the hand-computed discounted sum") {
  // chain: advancing 5 times reaches the goal; reward 1 arrives at t=4
  MdpSpec chain = sacd::make_chain(6, 0.99);
  EnvHandle env(chain);
  Rng rng(5);
  env.reset(rng);
  double ret = 0.0, discount = 1.0;
  while (!env.done()) {
    const auto res = env.step(1, rng);
    ret += discount * res.reward;
    discount *= 0.99;
  }
  const double expected = 1.0 * (0.99 * 0.99 * 0.99 * 0.99);
  CHECK(ret == expected);

  // retreat once first: r(0.05) at t=0, goal reward at t=5
  env.reset(rng);
  ret = 0.0;
  discount = 1.0;
  bool first = true;
  while (!env.done()) {
    const auto res = env.step(first ? 0 : 1, rng);
    first = false;
    ret += discount * res.reward;
    discount *= 0.99;
  }
  CHECK(ret == 0.05 + (0.99 * 0.99 * 0.99 * 0.99 * 0.99));
}

TEST_CASE("gridworld construction") {
  const MdpSpec grid = sacd::make_gridworld(3, 3, 8, {4}, -0.01);
  CHECK_NOTHROW(grid.validate());
  EnvHandle env(grid);
  Rng rng(1);

  SUBCASE("moving into a wall keeps the cell") {
    env.reset(rng);  // cell 0, top-left
    env.step(0, rng);  // up: wall
    CHECK(env.state() == 0);
    env.step(2, rng);  // left: wall
    CHECK(env.state() == 0);
  }

  SUBCASE("stepping onto the goal pays 1 plus the step penalty and ends the episode") {
    env.reset(rng);
    env.step(3, rng);  // 0 -> 1
    env.step(3, rng);  // 1 -> 2
    env.step(1, rng);  // 2 -> 5
    const auto res = env.step(1, rng);  // 5 -> 8 goal
    CHECK(res.reward == doctest::Approx(1.0 - 0.01).epsilon(1e-12));
    CHECK(res.terminal);
  }

  SUBCASE("stepping onto a trap pays -1 plus the step penalty") {
    env.reset(rng);
    env.step(3, rng);  // 0 -> 1
    const auto res = env.step(1, rng);  // 1 -> 4 trap
    CHECK(res.reward == doctest::Approx(-1.0 - 0.01).epsilon(1e-12));
    CHECK(res.terminal);
  }

  SUBCASE("bad goal or trap cells error") {
    CHECK_THROWS_AS(sacd::make_gridworld(3, 3, 9, {}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(sacd::make_gridworld(3, 3, 8, {11}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(sacd::make_gridworld(3, 3, 8, {8}, 0.0), std::invalid_argument);
  }
}

TEST_CASE("random MDPs") {
  SUBCASE("rows are stochastic within 1e-12 and shapes are right") {
    Rng rng(31);
    const MdpSpec mdp = sacd::make_random_mdp(5, 3, rng);
    CHECK(mdp.transition.size() == 5 * 3 * 5);
    CHECK(mdp.reward.size() == 15);
    CHECK_NOTHROW(mdp.validate());
  }

  SUBCASE("same seed gives the identical MDP") {
    Rng a(123), b(123);
    const MdpSpec ma = sacd::make_random_mdp(4, 2, a);
    const MdpSpec mb = sacd::make_random_mdp(4, 2, b);
    CHECK(ma.transition == mb.transition);
    CHECK(ma.reward == mb.reward);
  }
}

TEST_CASE("observation encoding is a bijection") {
  const MdpSpec mdp = sacd::make_named_mdp("gridworld5");
  EnvHandle env(mdp);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    const auto obs = env.one_hot(s);
    std::size_t hot = 0, recovered = 0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
      if (obs[i] == 1.0) {
        hot += 1;
        recovered = i;
      } else {
        CHECK(obs[i] == 0.0);
      }
    }
    CHECK(hot == 1);
    CHECK(recovered == s);
  }
}

TEST_CASE("clip_reward") {
  CHECK(sacd::clip_reward(2.5) == 1.0);
  CHECK(sacd::clip_reward(-0.3) == -0.3);
  CHECK(sacd::clip_reward(-7.0) == -1.0);
  CHECK_THROWS_AS(sacd::clip_reward(std::nan("")), std::invalid_argument);
}

TEST_CASE("named environments") {
  for (const char* name : {"bandit", "twostate", "chain", "gridworld5"}) {
    CHECK_NOTHROW(sacd::make_named_mdp(name).validate());
  }
  CHECK(sacd::make_named_mdp("bandit").gamma == 0.0);
  CHECK(sacd::make_named_mdp("twostate").gamma == 0.9);
  CHECK(sacd::make_named_mdp("twostate", 0.5).gamma == 0.5);
  CHECK_THROWS_AS(sacd::make_named_mdp("atari"), std::invalid_argument);
}
