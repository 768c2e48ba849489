// Copyright 2026 The ctxbench Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <cmath>

#include "ctxbench/difficulty.hpp"
#include "ctxbench/errors.hpp"
#include "ctxbench/rng.hpp"

using namespace ctxbench;

namespace {

const TimeConfig kTime{11, 60, 0.1};
const KalmanConfig kKalman{};

AgentTrack cv_track(const Vec2& start, const Vec2& vel, const TimeConfig& time) {
  AgentTrack track;
  track.agent_id = "a";
  track.states.resize(time.total());
  for (int t = 0; t < time.total(); ++t) {
    track.states[t].position = start + vel * (t * time.dt);
    track.states[t].velocity = vel;
    track.states[t].heading = vel.norm() > 1e-9 ? std::atan2(vel.y, vel.x) : 0.0;
    track.states[t].valid = true;
  }
  return track;
}

}  // namespace

TEST_CASE("noiseless constant-velocity forecasts match the truth") {
  const AgentTrack track = cv_track({3.0, -1.0}, {4.0, 2.0}, kTime);
  const std::vector<Vec2> forecast = kalman_forecast(track, kTime, kKalman);
  REQUIRE(forecast.size() == 60);
  for (int s = 0; s < 60; ++s) {
    CHECK((forecast[s] - track.states[kTime.t_hist + s].position).norm() < 1e-6);
  }
}

TEST_CASE("a stationary agent stays put") {
  const AgentTrack track = cv_track({5.0, 5.0}, {0.0, 0.0}, kTime);
  const std::vector<Vec2> forecast = kalman_forecast(track, kTime, kKalman);
  for (const Vec2& p : forecast) {
    CHECK((p - Vec2{5.0, 5.0}).norm() < 1e-9);
  }
}

TEST_CASE("fewer than two valid observations is an error") {
  AgentTrack track = cv_track({0, 0}, {1, 0}, kTime);
  for (int t = 0; t < kTime.t_hist - 1; ++t) track.states[t] = AgentState{};
  CHECK_THROWS_AS(kalman_forecast(track, kTime, kKalman), ContractError);
}

TEST_CASE("filtered velocity beats raw finite differences on noisy tracks") {
  // Monte-Carlo oracle over seeded trials: RMSE of the filter's final-step
  // velocity estimate vs. the last-difference estimate.
  Rng rng(55);
  double kalman_se = 0.0, fd_se = 0.0;
  const int trials = 100;
  for (int trial = 0; trial < trials; ++trial) {
    const Vec2 vel{rng.uniform(2.0, 10.0), rng.uniform(-3.0, 3.0)};
    AgentTrack track = cv_track({0, 0}, vel, kTime);
    std::vector<Vec2> noisy(kTime.t_hist);
    for (int t = 0; t < kTime.t_hist; ++t) {
      noisy[t] = track.states[t].position + Vec2{rng.normal(0.0, 0.1), rng.normal(0.0, 0.1)};
      track.states[t].position = noisy[t];
    }
    const std::vector<Vec2> forecast = kalman_forecast(track, kTime, kKalman);
    // One-step prediction implies estimated velocity = (f1 - f0)/dt.
    const Vec2 kalman_vel = (forecast[1] - forecast[0]) / kTime.dt;
    const Vec2 fd_vel = (noisy[kTime.t_hist - 1] - noisy[kTime.t_hist - 2]) / kTime.dt;
    kalman_se += (kalman_vel - vel).squared_norm();
    fd_se += (fd_vel - vel).squared_norm();
  }
  CHECK(std::sqrt(kalman_se / trials) < std::sqrt(fd_se / trials));
}

TEST_CASE("difficulty is zero on noiseless constant-velocity tracks") {
  const AgentTrack track = cv_track({-2.0, 7.0}, {6.0, -1.0}, kTime);
  const DifficultyRecord record = kalman_difficulty(track, kTime, kKalman);
  CHECK_FALSE(record.excluded);
  CHECK(record.difficulty <= 1e-6);
  REQUIRE(record.horizon_fde.size() == 3);
  for (const auto& fde : record.horizon_fde) {
    REQUIRE(fde.has_value());
    CHECK(*fde <= 1e-6);
  }
}

TEST_CASE("an abrupt stop matches the closed-form extrapolation error") {
  // Constant velocity through history, then frozen at the final position.
  AgentTrack track = cv_track({0, 0}, {5.0, 0.0}, kTime);
  const Vec2 stop_pos = track.states[kTime.t_hist - 1].position;
  for (int t = kTime.t_hist; t < kTime.total(); ++t) {
    track.states[t].position = stop_pos;
    track.states[t].velocity = {0, 0};
  }
  const DifficultyRecord record = kalman_difficulty(track, kTime, kKalman);
  // Forecast continues at 5 m/s: error at horizon h is 5h.
  CHECK(*record.horizon_fde[0] == doctest::Approx(5.0 * 2.0).epsilon(1e-4));
  CHECK(*record.horizon_fde[1] == doctest::Approx(5.0 * 4.0).epsilon(1e-4));
  CHECK(*record.horizon_fde[2] == doctest::Approx(5.0 * 6.0).epsilon(1e-4));
  CHECK(record.difficulty == doctest::Approx((10.0 + 20.0 + 30.0) / 3.0).epsilon(1e-4));
}

TEST_CASE("missing ground truth at a horizon falls back to the nearest earlier step") {
  AgentTrack track = cv_track({0, 0}, {5.0, 0.0}, kTime);
  // Invalidate everything beyond 4 s.
  for (int t = kTime.t_hist + 40; t < kTime.total(); ++t) track.states[t] = AgentState{};
  const DifficultyRecord record = kalman_difficulty(track, kTime, kKalman);
  REQUIRE(record.horizon_fde.size() == 3);
  CHECK(record.horizon_fde[0].has_value());
  CHECK(record.horizon_fde[1].has_value());
  CHECK(record.horizon_fde[2].has_value());  // falls back to the 4 s step
  CHECK_FALSE(record.excluded);
}

TEST_CASE("a track with no valid future is excluded with a flag") {
  AgentTrack track = cv_track({0, 0}, {5.0, 0.0}, kTime);
  for (int t = kTime.t_hist; t < kTime.total(); ++t) track.states[t] = AgentState{};
  const DifficultyRecord record = kalman_difficulty(track, kTime, kKalman);
  CHECK(record.excluded);
}

TEST_CASE("difficulty is invariant under rigid transforms") {
  Rng rng(60);
  for (int trial = 0; trial < 20; ++trial) {
    // A braking track: constant velocity history, decelerating future.
    AgentTrack track = cv_track({0, 0}, {8.0, 1.0}, kTime);
    for (int t = kTime.t_hist; t < kTime.total(); ++t) {
      const double tau = (t - kTime.t_hist) * kTime.dt;
      track.states[t].position.x -= 0.8 * tau * tau;
    }
    const double base = kalman_difficulty(track, kTime, kKalman).difficulty;

    const double rot = rng.uniform(-kPi, kPi);
    const Vec2 shift{rng.uniform(-100, 100), rng.uniform(-100, 100)};
    AgentTrack moved = track;
    for (auto& st : moved.states) {
      st.position = rotate(st.position, rot) + shift;
      st.velocity = rotate(st.velocity, rot);
      st.heading = normalize_angle(st.heading + rot);
    }
    const double transformed = kalman_difficulty(moved, kTime, kKalman).difficulty;
    CHECK(std::abs(base - transformed) < 1e-9);
  }
}

TEST_CASE("context difficulty averages per context") {
  std::vector<ContextLabel> labels(2);
  labels[0].key = {"s", "a"};
  labels[0].c_e = 0;
  labels[0].c_s = 5;
  labels[1].key = {"s", "b"};
  labels[1].c_e = 0;
  labels[1].c_s = 6;
  std::vector<DifficultyRecord> records(2);
  records[0].key = {"s", "a"};
  records[0].difficulty = 2.0;
  records[1].key = {"s", "b"};
  records[1].difficulty = 4.0;
  const ContextDifficulty cd = context_difficulty(labels, records);
  CHECK(cd.ego_mean.at(0) == doctest::Approx(3.0));
  CHECK(cd.social_mean.at(5) == doctest::Approx(2.0));
  CHECK(cd.social_mean.at(6) == doctest::Approx(4.0));
  CHECK(cd.ego_count.at(0) == 2);
}

TEST_CASE("context difficulty is a weighted partition of the total") {
  Rng rng(61);
  std::vector<ContextLabel> labels;
  std::vector<DifficultyRecord> records;
  double total = 0.0;
  for (int i = 0; i < 200; ++i) {
    ContextLabel l;
    l.key = {"s", "a" + std::to_string(i)};
    l.c_e = static_cast<int>(rng.uniform_int(0, 4));
    l.c_s = static_cast<int>(rng.uniform_int(0, 6));
    labels.push_back(l);
    DifficultyRecord r;
    r.key = l.key;
    r.difficulty = rng.uniform(0.0, 30.0);
    total += r.difficulty;
    records.push_back(r);
  }
  const ContextDifficulty cd = context_difficulty(labels, records);
  double ego_total = 0.0, social_total = 0.0;
  for (const auto& [ctx, mean] : cd.ego_mean) ego_total += mean * cd.ego_count.at(ctx);
  for (const auto& [ctx, mean] : cd.social_mean) social_total += mean * cd.social_count.at(ctx);
  CHECK(ego_total == doctest::Approx(total).epsilon(1e-9));
  CHECK(social_total == doctest::Approx(total).epsilon(1e-9));

  // Brute-force group-by oracle on the ego axis.
  std::map<int, std::pair<double, int>> groups;
  for (size_t i = 0; i < labels.size(); ++i) {
    groups[labels[i].c_e].first += records[i].difficulty;
    groups[labels[i].c_e].second += 1;
  }
  for (const auto& [ctx, acc] : groups) {
    CHECK(cd.ego_mean.at(ctx) == doctest::Approx(acc.first / acc.second).epsilon(1e-12));
  }
}

TEST_CASE("context difficulty rejects mismatched key sets") {
  std::vector<ContextLabel> labels(1);
  labels[0].key = {"s", "a"};
  std::vector<DifficultyRecord> records(1);
  records[0].key = {"s", "b"};
  CHECK_THROWS_AS(context_difficulty(labels, records), ContractError);
}

TEST_CASE("difficulty tables round-trip through csv") {
  std::vector<DifficultyRecord> records(1);
  records[0].key = {"s7", "ego"};
  records[0].agent_type = AgentType::kPedestrian;
  records[0].horizon_fde = {1.5, std::nullopt, 4.5};
  records[0].difficulty = 3.0;
  const std::string path = "/tmp/ctxbench_test_difficulty.csv";
  write_difficulty_table(records, kKalman, path);
  const auto loaded = read_difficulty_table(path);
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0].key == records[0].key);
  CHECK(loaded[0].horizon_fde[0] == 1.5);
  CHECK_FALSE(loaded[0].horizon_fde[1].has_value());
  CHECK(loaded[0].difficulty == 3.0);
  CHECK_FALSE(loaded[0].excluded);
}
