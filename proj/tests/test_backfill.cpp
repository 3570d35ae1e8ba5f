#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>

#include "rlbf/backfill.hpp"
#include "rlbf/error.hpp"
#include "test_util.hpp"

using namespace rlbf;

namespace {

Job make_job(std::int64_t id, double submit, double run, int nodes, double request = 0) {
  Job j;
  j.id = id;
  j.submit_time = submit;
  j.actual_runtime = run;
  j.requested_time = request > 0 ? request : run;
  j.requested_nodes = nodes;
  return j;
}

bool eligible(const BackfillContext& ctx, const Job& job, int free_nodes, int extra) {
  if (job.requested_nodes > free_nodes) return false;
  return ctx.clock + ctx.estimator.estimate(job) <= ctx.reservation || job.requested_nodes <= extra;
}

}  // namespace

TEST_CASE("EASY starts short jobs and jobs that fit the spare nodes") {
  // Ten nodes; six busy until t=100. The rjob needs eight, so it is
  // reserved at 100 with two nodes to spare.
  std::vector<Job> jobs = {make_job(1, 0, 100, 6), make_job(2, 0, 10, 8), make_job(3, 0, 50, 3),
                           make_job(4, 0, 200, 1), make_job(5, 0, 200, 1)};
  ClusterState s{10, 4, {{0, 0, 100}}, 0};
  const auto res = reserve(s, jobs, 8, RuntimeEstimator::request_time());
  CHECK(res.time == 100);
  CHECK(res.extra_nodes == 2);

  const std::vector<std::size_t> queue = {1, 2, 3, 4};
  BackfillContext ctx;
  ctx.clock = 0;
  ctx.rjob = 1;
  ctx.reservation = res.time;
  ctx.extra_nodes = res.extra_nodes;
  ctx.free_nodes = 4;
  ctx.total_nodes = 10;
  ctx.queue = queue;
  ctx.candidates = std::span<const std::size_t>(queue).subspan(1);
  ctx.jobs = jobs;
  ctx.cluster = &s;
  ctx.estimator = RuntimeEstimator::request_time();
  // Job 3 ends before 100; job 4 uses one of the spare nodes; job 5 would
  // still fit a spare node but no free node is left.
  CHECK(easy_backfill(ctx) == std::vector<std::size_t>{2, 3});

  ctx.extra_nodes = 0;
  CHECK(easy_backfill(ctx) == std::vector<std::size_t>{2});
}

TEST_CASE("EASY in a full simulation") {
  Trace t;
  t.cluster_size = 4;
  t.jobs = {make_job(1, 0, 100, 3), make_job(2, 1, 50, 4), make_job(3, 2, 40, 1),
            make_job(4, 3, 500, 1)};
  EasyBackfiller easy;
  const auto r = run_schedule(t, PolicyKind::Fcfs, &easy, RuntimeEstimator::request_time());
  CHECK(r.jobs[1].start == 100);
  CHECK(r.jobs[2].start == 2);    // ends at 42, before the reservation
  CHECK(r.jobs[3].start == 150);  // would hold a node past 100
  CHECK(r.backfilled == 1);
  CHECK(r.violations == 0);
}

TEST_CASE("EASY picks are valid and maximal") {
  std::mt19937_64 rng(21);
  std::size_t contexts = 0;
  for (int round = 0; round < 300; ++round) {
    const auto trace = testing::random_trace(rng, 50, 16);
    EasyBackfiller easy;
    SimulationObserver obs;
    obs.on_backfill = [&](const BackfillContext& ctx, std::span<const std::size_t> picks) {
      ++contexts;
      int free_nodes = ctx.free_nodes;
      int extra = ctx.extra_nodes;
      for (auto p : picks) {
        const auto& job = ctx.jobs[p];
        CHECK(p != ctx.rjob);
        CHECK(eligible(ctx, job, free_nodes, extra));
        free_nodes -= job.requested_nodes;
        if (ctx.clock + ctx.estimator.estimate(job) > ctx.reservation) extra -= job.requested_nodes;
      }
      for (auto c : ctx.candidates) {
        if (std::find(picks.begin(), picks.end(), c) != picks.end()) continue;
        CHECK_FALSE(eligible(ctx, ctx.jobs[c], free_nodes, extra));
      }
    };
    run_schedule(trace, PolicyKind::Fcfs, &easy, RuntimeEstimator::request_time(), &obs);
  }
  CHECK(contexts > 100);
}

TEST_CASE("EASY never delays the reserved job") {
  std::mt19937_64 rng(22);
  for (int round = 0; round < 300; ++round) {
    const auto trace = testing::random_trace(rng, 50, 16);
    for (const auto& est : {RuntimeEstimator::request_time(), RuntimeEstimator::actual_runtime()}) {
      EasyBackfiller easy;
      std::vector<std::pair<std::size_t, double>> promises;
      std::map<std::size_t, double> starts;
      SimulationObserver obs;
      obs.on_backfill = [&](const BackfillContext& ctx, std::span<const std::size_t>) {
        promises.push_back({ctx.rjob, ctx.reservation});
      };
      obs.on_start = [&](std::size_t job, double at) { starts[job] = at; };
      const auto r = run_schedule(trace, PolicyKind::Fcfs, &easy, est, &obs);
      for (auto [rjob, when] : promises) CHECK(starts.at(rjob) <= when);
      if (est.mode == RuntimeEstimator::Mode::ActualRuntime) CHECK(r.violations == 0);
    }
  }
}

TEST_CASE("scan order changes which candidates EASY considers first") {
  std::vector<Job> jobs = {make_job(1, 0, 100, 4), make_job(2, 0, 10, 4), make_job(3, 0, 90, 2),
                           make_job(4, 1, 20, 2)};
  ClusterState s{6, 2, {{0, 0, 100}}, 0};
  const std::vector<std::size_t> queue = {1, 2, 3};
  BackfillContext ctx;
  ctx.rjob = 1;
  ctx.reservation = 100;
  ctx.extra_nodes = 0;
  ctx.free_nodes = 2;
  ctx.total_nodes = 6;
  ctx.queue = queue;
  ctx.candidates = std::span<const std::size_t>(queue).subspan(1);
  ctx.jobs = jobs;
  ctx.cluster = &s;
  EasyBackfiller fcfs_scan;
  EasyBackfiller sjf_scan(PolicyKind::Sjf);
  CHECK(fcfs_scan.select(ctx) == std::vector<std::size_t>{2});
  CHECK(sjf_scan.select(ctx) == std::vector<std::size_t>{3});
}

TEST_CASE("learned backfilling produces valid schedules") {
  std::mt19937_64 rng(23);
  NetworkShape shape;
  shape.max_jobs = 16;
  for (int round = 0; round < 60; ++round) {
    const auto params = AgentParams::random(shape, round);
    const auto trace = testing::random_trace(rng, 60, 16);
    Trajectory traj;
    LearnedBackfiller agent(params, round % 2 ? LearnedBackfiller::Mode::Sample
                                              : LearnedBackfiller::Mode::Greedy,
                            round, &traj);
    SimulationObserver obs;
    obs.on_backfill = [&](const BackfillContext& ctx, std::span<const std::size_t> picks) {
      int free_nodes = ctx.free_nodes;
      for (auto p : picks) {
        CHECK(p != ctx.rjob);
        CHECK(ctx.jobs[p].requested_nodes <= free_nodes);
        free_nodes -= ctx.jobs[p].requested_nodes;
      }
    };
    const auto r = run_schedule(trace, PolicyKind::Fcfs, &agent, RuntimeEstimator::request_time(), &obs);
    CHECK(r.jobs.size() == trace.jobs.size());
    CHECK(agent.decisions() == traj.steps.size());
    for (const auto& step : traj.steps) {
      CHECK(step.log_prob <= 0);
      if (step.action != shape.max_jobs) {
        REQUIRE(step.action < step.selectable.size());
        CHECK(step.selectable[step.action] == 1);
      }
    }
  }
}

TEST_CASE("greedy learned backfilling is deterministic") {
  std::mt19937_64 rng(24);
  NetworkShape shape;
  shape.max_jobs = 16;
  const auto params = AgentParams::random(shape, 5);
  const auto trace = testing::random_trace(rng, 80, 16);
  LearnedBackfiller a(params, LearnedBackfiller::Mode::Greedy);
  LearnedBackfiller b(params, LearnedBackfiller::Mode::Greedy);
  CHECK(to_csv(run_schedule(trace, PolicyKind::Fcfs, &a, RuntimeEstimator::request_time())) ==
        to_csv(run_schedule(trace, PolicyKind::Fcfs, &b, RuntimeEstimator::request_time())));
}

TEST_CASE("strategy strings") {
  CHECK(StrategySpec::parse("none").kind == StrategySpec::Kind::None);
  CHECK(StrategySpec::parse("easy").name() == "easy:req");
  CHECK(StrategySpec::parse("easy:ar").name() == "easy:ar");
  const auto noisy = StrategySpec::parse("easy:noisy:40");
  CHECK(noisy.estimator.noise_fraction == doctest::Approx(0.4));
  const auto rl = StrategySpec::parse("rl:models/a.bin");
  CHECK(rl.kind == StrategySpec::Kind::Learned);
  CHECK(rl.model_path == "models/a.bin");
  CHECK(rl.name() == "rl:models/a.bin");
  for (auto bad : {"", "easy:foo", "easy:noisy:x", "easy:noisy:-5", "rl:", "conservative"}) {
    CHECK_THROWS_AS(StrategySpec::parse(bad), Error);
  }
}

namespace {

// Starts the first fitting candidate whatever it does to the rjob.
class Reckless : public Backfiller {
 public:
  std::vector<std::size_t> select(const BackfillContext& ctx) override {
    for (auto c : ctx.candidates) {
      if (ctx.jobs[c].requested_nodes <= ctx.free_nodes) return {c};
    }
    return {};
  }
};

}  // namespace

TEST_CASE("a pick that delays the rjob counts as a violation") {
  // Job 3 runs until 402 on the node job 2 is waiting for.
  Trace t;
  t.cluster_size = 4;
  t.jobs = {make_job(1, 0, 100, 3), make_job(2, 1, 50, 4), make_job(3, 2, 400, 1)};
  Reckless reckless;
  const auto r = run_schedule(t, PolicyKind::Fcfs, &reckless, RuntimeEstimator::request_time());
  CHECK(r.violations == 1);
  CHECK(r.jobs[1].start == 402);

  // The same pick is harmless when it ends before the reservation.
  t.jobs[2].actual_runtime = t.jobs[2].requested_time = 90;
  CHECK(run_schedule(t, PolicyKind::Fcfs, &reckless, RuntimeEstimator::request_time()).violations == 0);

  // Or when it only uses nodes the rjob does not need.
  t.cluster_size = 5;
  t.jobs[2].actual_runtime = t.jobs[2].requested_time = 400;
  const auto spare = run_schedule(t, PolicyKind::Fcfs, &reckless, RuntimeEstimator::request_time());
  CHECK(spare.violations == 0);
  CHECK(spare.jobs[1].start == 100);
}
