// Command-line front end: trace statistics, synthetic traces, single
// simulations, and the experiment drivers.

#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rlbf/error.hpp"
#include "rlbf/harness.hpp"
#include "rlbf/model_io.hpp"
#include "rlbf/ppo.hpp"
#include "rlbf/workload.hpp"

namespace fs = std::filesystem;
using namespace rlbf;

namespace {

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
  } else {
    write_file(out_path, text);
  }
}

std::vector<PolicyKind> parse_policies(const std::vector<std::string>& names) {
  std::vector<PolicyKind> out;
  for (const auto& n : names) out.push_back(parse_policy(n));
  return out;
}

std::optional<std::size_t> job_limit(std::size_t max_jobs) {
  return max_jobs == 0 ? std::nullopt : std::optional<std::size_t>(max_jobs);
}

std::string protocol_string(const SamplingProtocol& p) {
  return std::to_string(p.count) + "x" + std::to_string(p.length) + "@" + std::to_string(p.base_seed);
}

std::string config_json(const TrainConfig& c, const std::string& trace, const std::string& policy) {
  nlohmann::ordered_json j;
  j["trace"] = trace;
  j["policy"] = policy;
  j["epochs"] = c.epochs;
  j["trajectories_per_epoch"] = c.trajectories_per_epoch;
  j["jobs_per_trajectory"] = c.jobs_per_trajectory;
  j["update_iterations"] = c.update_iterations;
  j["learning_rate"] = c.learning_rate;
  j["clip_ratio"] = c.clip_ratio;
  j["discount"] = c.discount;
  j["gae_lambda"] = c.gae_lambda;
  j["policy_hidden"] = c.policy_hidden;
  j["value_hidden"] = c.value_hidden;
  j["max_observed_jobs"] = c.max_observed_jobs;
  j["violation_penalty"] = c.violation_penalty;
  j["seed"] = c.seed;
  return j.dump(2) + "\n";
}

void add_protocol_flags(CLI::App* cmd, SamplingProtocol& protocol) {
  cmd->add_option("--length", protocol.length, "jobs per sampled window")->capture_default_str();
  cmd->add_option("--samples", protocol.count, "number of sampled windows")->capture_default_str();
  cmd->add_option("--seed", protocol.base_seed, "seed of the first window")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Batch-cluster scheduling simulator with EASY and learned backfilling"};
  app.require_subcommand(1);

  // parse-stats
  std::string trace_path;
  std::size_t max_jobs = 10000;
  std::string out_path;
  auto* stats_cmd = app.add_subcommand("parse-stats", "Print trace statistics as JSON");
  stats_cmd->add_option("--trace", trace_path, "SWF trace")->required();
  stats_cmd->add_option("--max-jobs", max_jobs, "keep the first N jobs (0 = all)")->capture_default_str();
  stats_cmd->add_option("--out", out_path, "output file (default stdout)");

  // gen-trace
  SyntheticSpec synth;
  std::uint64_t gen_seed = 0;
  auto* gen_cmd = app.add_subcommand("gen-trace", "Generate a synthetic SWF trace");
  gen_cmd->add_option("--jobs", synth.job_count)->capture_default_str();
  gen_cmd->add_option("--cluster-size", synth.cluster_size)->capture_default_str();
  gen_cmd->add_option("--interarrival", synth.mean_interarrival, "mean seconds between submissions")->capture_default_str();
  gen_cmd->add_option("--runtime-log-mean", synth.runtime_log_mean)->capture_default_str();
  gen_cmd->add_option("--runtime-log-sigma", synth.runtime_log_sigma)->capture_default_str();
  gen_cmd->add_option("--max-node-power", synth.max_node_power)->capture_default_str();
  gen_cmd->add_option("--seed", gen_seed)->capture_default_str();
  gen_cmd->add_option("--out", out_path, "output SWF file (default stdout)");

  // simulate
  std::string policy = "fcfs";
  std::string strategy = "easy:req";
  std::size_t sample_length = 0;
  std::uint64_t sim_seed = 0;
  std::string json_path;
  auto* sim_cmd = app.add_subcommand("simulate", "Schedule one trace and write per-job CSV");
  sim_cmd->add_option("--trace", trace_path)->required();
  sim_cmd->add_option("--max-jobs", max_jobs, "keep the first N jobs (0 = all)")->capture_default_str();
  sim_cmd->add_option("--policy", policy, "fcfs | sjf | wfp3 | f1")->capture_default_str();
  sim_cmd->add_option("--strategy", strategy, "none | easy:req | easy:ar | easy:noisy:<pct> | rl:<model>")->capture_default_str();
  sim_cmd->add_option("--sample-length", sample_length, "simulate a sampled window instead of the whole trace");
  sim_cmd->add_option("--seed", sim_seed, "window seed")->capture_default_str();
  sim_cmd->add_option("--out", out_path, "per-job CSV (default stdout)");
  sim_cmd->add_option("--json", json_path, "aggregate JSON record");

  // noise-sweep
  std::vector<std::string> policies = {"fcfs", "sjf", "wfp3", "f1"};
  std::vector<double> noise_pct = {0, 5, 10, 20, 40, 100};
  SamplingProtocol protocol;
  std::string out_dir;
  auto* noise_cmd = app.add_subcommand("noise-sweep", "EASY with noisy actual runtimes");
  noise_cmd->add_option("--trace", trace_path)->required();
  noise_cmd->add_option("--max-jobs", max_jobs)->capture_default_str();
  noise_cmd->add_option("--policies", policies)->delimiter(',')->capture_default_str();
  noise_cmd->add_option("--noise", noise_pct, "noise levels in percent")->delimiter(',')->capture_default_str();
  add_protocol_flags(noise_cmd, protocol);
  noise_cmd->add_option("--out-dir", out_dir, "write noise_sweep.csv and manifest.json here");

  // train
  TrainConfig train;
  std::string config_path, run_dir;
  auto* train_cmd = app.add_subcommand("train", "Train the backfilling agent with PPO");
  train_cmd->add_option("--trace", trace_path)->required();
  train_cmd->add_option("--max-jobs", max_jobs)->capture_default_str();
  train_cmd->add_option("--policy", policy)->capture_default_str();
  train_cmd->add_option("--config", config_path, "key = value file; flags override it");
  train_cmd->add_option("--run-dir", run_dir, "output directory")->required();
  auto* o_epochs = train_cmd->add_option("--epochs", train.epochs);
  auto* o_traj = train_cmd->add_option("--trajectories-per-epoch", train.trajectories_per_epoch);
  auto* o_jobs = train_cmd->add_option("--jobs-per-trajectory", train.jobs_per_trajectory);
  auto* o_iters = train_cmd->add_option("--update-iterations", train.update_iterations);
  auto* o_lr = train_cmd->add_option("--learning-rate", train.learning_rate);
  auto* o_clip = train_cmd->add_option("--clip-ratio", train.clip_ratio);
  auto* o_disc = train_cmd->add_option("--discount", train.discount);
  auto* o_lam = train_cmd->add_option("--gae-lambda", train.gae_lambda);
  auto* o_ph = train_cmd->add_option("--policy-hidden", train.policy_hidden);
  auto* o_vh = train_cmd->add_option("--value-hidden", train.value_hidden);
  auto* o_obs = train_cmd->add_option("--max-observed-jobs", train.max_observed_jobs);
  auto* o_pen = train_cmd->add_option("--violation-penalty", train.violation_penalty);
  auto* o_seed = train_cmd->add_option("--seed", train.seed);
  bool quiet = false;
  train_cmd->add_flag("--quiet", quiet, "no per-epoch progress on stderr");

  // evaluate
  std::vector<std::string> traces;
  std::vector<std::string> strategies = {"easy:req"};
  std::vector<std::string> eval_policies = {"fcfs"};
  auto* eval_cmd = app.add_subcommand("evaluate", "Mean bsld per (trace, policy, strategy)");
  eval_cmd->add_option("--trace", traces)->required();
  eval_cmd->add_option("--max-jobs", max_jobs)->capture_default_str();
  eval_cmd->add_option("--policy", eval_policies)->delimiter(',')->capture_default_str();
  eval_cmd->add_option("--strategy", strategies)->delimiter(',')->capture_default_str();
  add_protocol_flags(eval_cmd, protocol);
  eval_cmd->add_option("--out-dir", out_dir, "write evaluation.csv and manifest.json here");

  // cross-eval
  std::vector<std::string> model_args;
  std::vector<std::string> cross_policies = {"fcfs", "sjf"};
  auto* cross_cmd = app.add_subcommand("cross-eval", "Every model on every trace");
  cross_cmd->add_option("--model", model_args, "NAME=PATH")->required();
  cross_cmd->add_option("--trace", traces)->required();
  cross_cmd->add_option("--max-jobs", max_jobs)->capture_default_str();
  cross_cmd->add_option("--policy", cross_policies)->delimiter(',')->capture_default_str();
  add_protocol_flags(cross_cmd, protocol);
  cross_cmd->add_option("--out-dir", out_dir, "write cross_eval.csv and manifest.json here");

  // export-curve
  auto* curve_cmd = app.add_subcommand("export-curve", "Training curve CSV from a run directory");
  curve_cmd->add_option("--run-dir", run_dir)->required();
  curve_cmd->add_option("--out", out_path, "CSV file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*stats_cmd) {
      const auto trace = load_swf(trace_path, std::nullopt, job_limit(max_jobs));
      emit(stats_to_json(compute_stats(trace)) + "\n", out_path);
    } else if (*gen_cmd) {
      emit(to_swf(generate_synthetic(synth, gen_seed)), out_path);
    } else if (*sim_cmd) {
      auto trace = load_swf(trace_path, std::nullopt, job_limit(max_jobs));
      if (sample_length > 0) trace = sample_sequence(trace, sample_length, sim_seed);
      const auto spec = StrategySpec::parse(strategy);
      const auto base = parse_policy(policy);
      ScheduleResult result;
      if (spec.kind == StrategySpec::Kind::Easy) {
        EasyBackfiller easy;
        result = run_schedule(trace, base, &easy, spec.estimator);
      } else if (spec.kind == StrategySpec::Kind::Learned) {
        const auto params = load_model(spec.model_path);
        LearnedBackfiller agent(params, LearnedBackfiller::Mode::Greedy);
        result = run_schedule(trace, base, &agent, spec.estimator);
      } else {
        result = run_schedule(trace, base, nullptr, spec.estimator);
      }
      emit(to_csv(result), out_path);
      if (!json_path.empty()) write_file(json_path, to_json(result) + "\n");
    } else if (*noise_cmd) {
      const auto trace = load_named_trace(trace_path, job_limit(max_jobs));
      std::vector<double> levels;
      for (double p : noise_pct) levels.push_back(p / 100.0);
      const auto rows = run_noise_sweep(trace, parse_policies(policies), levels, protocol);
      const auto csv = noise_sweep_csv(rows);
      if (out_dir.empty()) {
        std::cout << csv;
      } else {
        write_file((fs::path(out_dir) / "noise_sweep.csv").string(), csv);
        write_manifest(out_dir, "noise-sweep", {{"protocol", protocol_string(protocol)}},
                       {trace_path}, protocol.seeds());
      }
    } else if (*train_cmd) {
      const TrainConfig flags = train;
      if (!config_path.empty()) {
        train = TrainConfig{};
        apply_train_config_file(train, config_path);
        // Explicit flags win over the file.
        if (o_epochs->count()) train.epochs = flags.epochs;
        if (o_traj->count()) train.trajectories_per_epoch = flags.trajectories_per_epoch;
        if (o_jobs->count()) train.jobs_per_trajectory = flags.jobs_per_trajectory;
        if (o_iters->count()) train.update_iterations = flags.update_iterations;
        if (o_lr->count()) train.learning_rate = flags.learning_rate;
        if (o_clip->count()) train.clip_ratio = flags.clip_ratio;
        if (o_disc->count()) train.discount = flags.discount;
        if (o_lam->count()) train.gae_lambda = flags.gae_lambda;
        if (o_ph->count()) train.policy_hidden = flags.policy_hidden;
        if (o_vh->count()) train.value_hidden = flags.value_hidden;
        if (o_obs->count()) train.max_observed_jobs = flags.max_observed_jobs;
        if (o_pen->count()) train.violation_penalty = flags.violation_penalty;
        if (o_seed->count()) train.seed = flags.seed;
      }
      train.validate();
      const auto trace = load_swf(trace_path, std::nullopt, job_limit(max_jobs));
      fs::create_directories(run_dir);
      fs::remove(fs::path(run_dir) / "epochs.jsonl");
      write_file((fs::path(run_dir) / "config.json").string(), config_json(train, trace_path, policy));
      const auto result = ppo_train(trace, parse_policy(policy), train,
                                    [&](const EpochRecord& r, const AgentParams&) {
                                      write_epoch_record(run_dir, r);
                                      if (!quiet) {
                                        std::cerr << "epoch " << r.epoch << " reward " << r.mean_reward
                                                  << " bsld " << r.mean_bsld << " baseline "
                                                  << r.mean_baseline_bsld << " steps " << r.steps
                                                  << " violations " << r.violations << "\n";
                                      }
                                    });
      save_model(result.params, (fs::path(run_dir) / "model.bin").string());
      write_file((fs::path(run_dir) / "curve.csv").string(), training_curve_csv(result.curve));
    } else if (*eval_cmd) {
      ExperimentSpec spec;
      spec.trace_paths = traces;
      spec.policies = parse_policies(eval_policies);
      spec.strategies = strategies;
      spec.protocol = protocol;
      spec.max_jobs = job_limit(max_jobs);
      const auto csv = cells_csv(evaluate_matrix(spec));
      if (out_dir.empty()) {
        std::cout << csv;
      } else {
        write_file((fs::path(out_dir) / "evaluation.csv").string(), csv);
        std::vector<std::string> inputs = traces;
        for (const auto& s : strategies) {
          const auto parsed = StrategySpec::parse(s);
          if (parsed.kind == StrategySpec::Kind::Learned) inputs.push_back(parsed.model_path);
        }
        write_manifest(out_dir, "evaluate", {{"protocol", protocol_string(protocol)}}, inputs,
                       protocol.seeds());
      }
    } else if (*cross_cmd) {
      std::map<std::string, std::string> models;
      for (const auto& arg : model_args) {
        const auto eq = arg.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == arg.size()) {
          throw Error("config_error", "--model expects NAME=PATH, got '" + arg + "'");
        }
        models[arg.substr(0, eq)] = arg.substr(eq + 1);
      }
      std::vector<NamedTrace> loaded;
      for (const auto& t : traces) loaded.push_back(load_named_trace(t, job_limit(max_jobs)));
      const auto csv = cells_csv(cross_evaluate(models, loaded, parse_policies(cross_policies), protocol));
      if (out_dir.empty()) {
        std::cout << csv;
      } else {
        write_file((fs::path(out_dir) / "cross_eval.csv").string(), csv);
        std::vector<std::string> inputs = traces;
        for (const auto& [name, path] : models) inputs.push_back(path);
        write_manifest(out_dir, "cross-eval", {{"protocol", protocol_string(protocol)}}, inputs,
                       protocol.seeds());
      }
    } else if (*curve_cmd) {
      emit(export_training_curve(run_dir), out_path);
    }
  } catch (const Error& e) {
    nlohmann::json line{{"error", e.code()}, {"message", e.what()}};
    std::cerr << line.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    nlohmann::json line{{"error", "internal_error"}, {"message", e.what()}};
    std::cerr << line.dump() << "\n";
    return 1;
  }
  return 0;
}
