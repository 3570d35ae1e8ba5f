#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rlbf/backfill.hpp"
#include "rlbf/ppo.hpp"
#include "rlbf/workload.hpp"

namespace rlbf {

/// Evaluation windows: `count` samples of `length` jobs, sample i drawn with
/// seed base_seed + i.
struct SamplingProtocol {
  std::size_t length = 1024;
  std::size_t count = 10;
  std::uint64_t base_seed = 0;

  std::vector<std::uint64_t> seeds() const;
};

struct NamedTrace {
  std::string name;
  Trace trace;
  std::string path;  // empty for in-memory traces
};

/// Loads an SWF file, keeping the first `max_jobs` jobs. The name is the
/// file's stem.
NamedTrace load_named_trace(const std::string& path, std::optional<std::size_t> max_jobs = 10000);

struct CellResult {
  std::string trace;
  std::string policy;
  std::string strategy;
  std::vector<std::uint64_t> seeds;
  std::vector<double> samples;  // mean bsld per window
  double mean = 0;
};

/// Loaded models keyed by strategy string ("rl:<path>") or name.
using ModelSet = std::map<std::string, AgentParams>;

/// Mean bsld of one (trace, policy, strategy) combination over the protocol's
/// windows. Learned strategies act greedily and need their model in `models`.
CellResult evaluate_cell(const NamedTrace& trace, PolicyKind policy, const StrategySpec& strategy,
                         const SamplingProtocol& protocol, const ModelSet& models = {});

struct NoiseSweepRow {
  std::string policy;
  double noise = 0;
  CellResult cell;
  std::optional<double> easy_request_mean;  // EASY on request times, if the trace has them
};

/// EASY with runtime estimates actual * (1 + noise) for every policy and
/// noise level.
std::vector<NoiseSweepRow> run_noise_sweep(const NamedTrace& trace,
                                           const std::vector<PolicyKind>& policies,
                                           const std::vector<double>& noise_levels,
                                           const SamplingProtocol& protocol);
std::string noise_sweep_csv(const std::vector<NoiseSweepRow>& rows);

struct ExperimentSpec {
  std::vector<std::string> trace_paths;
  std::vector<PolicyKind> policies = {PolicyKind::Fcfs};
  std::vector<std::string> strategies = {"easy:req"};
  SamplingProtocol protocol;
  std::optional<std::size_t> max_jobs = 10000;
  std::string output_dir;
};

/// Every (trace, policy, strategy) cell. Model files referenced by "rl:"
/// strategies are loaded up front; a missing one fails naming its column.
std::vector<CellResult> evaluate_matrix(const ExperimentSpec& spec);
std::vector<CellResult> evaluate_matrix(const std::vector<NamedTrace>& traces,
                                        const std::vector<PolicyKind>& policies,
                                        const std::vector<StrategySpec>& strategies,
                                        const SamplingProtocol& protocol, const ModelSet& models);

/// Each named model on each trace under each base policy, next to the EASY
/// baselines (request time, and actual runtime).
std::vector<CellResult> cross_evaluate(const std::map<std::string, std::string>& model_paths,
                                       const std::vector<NamedTrace>& traces,
                                       const std::vector<PolicyKind>& policies,
                                       const SamplingProtocol& protocol);

/// trace,policy,strategy,mean,s0..s{n-1}
std::string cells_csv(const std::vector<CellResult>& cells);

/// Run directory written by `train`: config.json, epochs.jsonl, model.bin.
void write_epoch_record(const std::string& run_dir, const EpochRecord& record);
std::vector<EpochRecord> read_epoch_records(const std::string& run_dir);

/// epoch,mean_reward,mean_bsld
std::string export_training_curve(const std::string& run_dir);

std::string training_curve_csv(const std::vector<EpochRecord>& curve);

/// `git hash-object` of a file's contents.
std::string git_blob_hash(const std::string& path);

/// manifest.json: the experiment parameters, seeds and input hashes.
void write_manifest(const std::string& dir, const std::string& command,
                    const std::map<std::string, std::string>& parameters,
                    const std::vector<std::string>& inputs, const std::vector<std::uint64_t>& seeds);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace rlbf

namespace rlbf {

/// Reads `key = value` lines ('#' comments) into `config`. Keys are the
/// TrainConfig field names; unknown keys are an error.
void apply_train_config_file(TrainConfig& config, const std::string& path);
void apply_train_config_text(TrainConfig& config, const std::string& text);

}  // namespace rlbf
