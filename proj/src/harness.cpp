#include "rlbf/harness.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>
#include <openssl/evp.h>

#include "rlbf/error.hpp"
#include "rlbf/model_io.hpp"

namespace rlbf {
namespace fs = std::filesystem;

std::vector<std::uint64_t> SamplingProtocol::seeds() const {
  std::vector<std::uint64_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = base_seed + i;
  return out;
}

NamedTrace load_named_trace(const std::string& path, std::optional<std::size_t> max_jobs) {
  NamedTrace named;
  named.name = fs::path(path).stem().string();
  named.path = path;
  named.trace = load_swf(path, std::nullopt, max_jobs);
  return named;
}

CellResult evaluate_cell(const NamedTrace& trace, PolicyKind policy, const StrategySpec& strategy,
                         const SamplingProtocol& protocol, const ModelSet& models) {
  CellResult cell;
  cell.trace = trace.name;
  cell.policy = policy_name(policy);
  cell.strategy = strategy.name();
  cell.seeds = protocol.seeds();

  const AgentParams* params = nullptr;
  if (strategy.kind == StrategySpec::Kind::Learned) {
    auto it = models.find(strategy.name());
    if (it == models.end()) it = models.find(strategy.model_path);
    if (it == models.end()) {
      throw Error("model_error", "no model loaded for column " + strategy.name());
    }
    params = &it->second;
  }

  double sum = 0;
  for (auto seed : cell.seeds) {
    const auto sequence = sample_sequence(trace.trace, protocol.length, seed);
    double bsld = 0;
    switch (strategy.kind) {
      case StrategySpec::Kind::None:
        bsld = run_schedule(sequence, policy, nullptr, strategy.estimator).avg_bsld;
        break;
      case StrategySpec::Kind::Easy: {
        EasyBackfiller easy;
        bsld = run_schedule(sequence, policy, &easy, strategy.estimator).avg_bsld;
        break;
      }
      case StrategySpec::Kind::Learned: {
        LearnedBackfiller agent(*params, LearnedBackfiller::Mode::Greedy);
        bsld = run_schedule(sequence, policy, &agent, strategy.estimator).avg_bsld;
        break;
      }
    }
    cell.samples.push_back(bsld);
    sum += bsld;
  }
  cell.mean = cell.samples.empty() ? 0 : sum / static_cast<double>(cell.samples.size());
  return cell;
}

std::vector<NoiseSweepRow> run_noise_sweep(const NamedTrace& trace,
                                           const std::vector<PolicyKind>& policies,
                                           const std::vector<double>& noise_levels,
                                           const SamplingProtocol& protocol) {
  for (double noise : noise_levels) {
    if (!(noise >= 0)) throw Error("config_error", "noise levels must be >= 0");
  }
  std::vector<NoiseSweepRow> rows;
  for (auto policy : policies) {
    std::optional<double> request_mean;
    if (trace.trace.has_request_time) {
      request_mean = evaluate_cell(trace, policy, StrategySpec::parse("easy:req"), protocol).mean;
    }
    for (double noise : noise_levels) {
      StrategySpec spec;
      spec.kind = StrategySpec::Kind::Easy;
      spec.estimator = RuntimeEstimator::noisy_actual(noise);
      NoiseSweepRow row;
      row.policy = policy_name(policy);
      row.noise = noise;
      row.cell = evaluate_cell(trace, policy, spec, protocol);
      row.easy_request_mean = request_mean;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

namespace {

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

}  // namespace

std::string noise_sweep_csv(const std::vector<NoiseSweepRow>& rows) {
  std::ostringstream out;
  const std::size_t samples = rows.empty() ? 0 : rows.front().cell.samples.size();
  out << "trace,policy,noise,mean_bsld,easy_req_mean_bsld";
  for (std::size_t i = 0; i < samples; ++i) out << ",s" << i;
  out << '\n';
  for (const auto& r : rows) {
    out << r.cell.trace << ',' << r.policy << ',' << fmt(r.noise) << ',' << fmt(r.cell.mean) << ','
        << (r.easy_request_mean ? fmt(*r.easy_request_mean) : "");
    for (double s : r.cell.samples) out << ',' << fmt(s);
    out << '\n';
  }
  return out.str();
}

std::vector<CellResult> evaluate_matrix(const std::vector<NamedTrace>& traces,
                                        const std::vector<PolicyKind>& policies,
                                        const std::vector<StrategySpec>& strategies,
                                        const SamplingProtocol& protocol, const ModelSet& models) {
  std::vector<CellResult> cells;
  for (const auto& trace : traces) {
    for (auto policy : policies) {
      for (const auto& strategy : strategies) {
        cells.push_back(evaluate_cell(trace, policy, strategy, protocol, models));
      }
    }
  }
  return cells;
}

std::vector<CellResult> evaluate_matrix(const ExperimentSpec& spec) {
  std::vector<StrategySpec> strategies;
  ModelSet models;
  for (const auto& text : spec.strategies) {
    auto strategy = StrategySpec::parse(text);
    if (strategy.kind == StrategySpec::Kind::Learned && !models.contains(strategy.name())) {
      if (!fs::exists(strategy.model_path)) {
        throw Error("model_error", "column " + strategy.name() + ": model file " +
                                       strategy.model_path + " does not exist");
      }
      models.emplace(strategy.name(), load_model(strategy.model_path));
    }
    strategies.push_back(std::move(strategy));
  }
  std::vector<NamedTrace> traces;
  for (const auto& path : spec.trace_paths) traces.push_back(load_named_trace(path, spec.max_jobs));
  return evaluate_matrix(traces, spec.policies, strategies, spec.protocol, models);
}

std::vector<CellResult> cross_evaluate(const std::map<std::string, std::string>& model_paths,
                                       const std::vector<NamedTrace>& traces,
                                       const std::vector<PolicyKind>& policies,
                                       const SamplingProtocol& protocol) {
  ModelSet models;
  for (const auto& [name, path] : model_paths) {
    if (!fs::exists(path)) {
      throw Error("model_error", "column rl:" + name + ": model file " + path + " does not exist");
    }
    models.emplace(name, load_model(path));
  }
  std::vector<CellResult> cells;
  for (const auto& trace : traces) {
    for (auto policy : policies) {
      if (trace.trace.has_request_time) {
        cells.push_back(evaluate_cell(trace, policy, StrategySpec::parse("easy:req"), protocol));
      }
      cells.push_back(evaluate_cell(trace, policy, StrategySpec::parse("easy:ar"), protocol));
      for (const auto& [name, path] : model_paths) {
        StrategySpec spec;
        spec.kind = StrategySpec::Kind::Learned;
        spec.model_path = name;
        spec.estimator = RuntimeEstimator::request_time();
        cells.push_back(evaluate_cell(trace, policy, spec, protocol, models));
      }
    }
  }
  return cells;
}

std::string cells_csv(const std::vector<CellResult>& cells) {
  std::ostringstream out;
  std::size_t samples = 0;
  for (const auto& c : cells) samples = std::max(samples, c.samples.size());
  out << "trace,policy,strategy,mean_bsld";
  for (std::size_t i = 0; i < samples; ++i) out << ",s" << i;
  out << '\n';
  for (const auto& c : cells) {
    out << c.trace << ',' << c.policy << ',' << c.strategy << ',' << fmt(c.mean);
    for (double s : c.samples) out << ',' << fmt(s);
    out << '\n';
  }
  return out.str();
}

void write_epoch_record(const std::string& run_dir, const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["mean_reward"] = r.mean_reward;
  j["mean_bsld"] = r.mean_bsld;
  j["mean_baseline_bsld"] = r.mean_baseline_bsld;
  j["steps"] = r.steps;
  j["violations"] = r.violations;
  j["policy_loss"] = r.policy_loss;
  j["value_loss_start"] = r.value_loss_start;
  j["value_loss_end"] = r.value_loss_end;
  j["approx_kl"] = r.approx_kl;
  std::ofstream out(fs::path(run_dir) / "epochs.jsonl", std::ios::app);
  if (!out) throw Error("io_error", "cannot append to " + run_dir + "/epochs.jsonl");
  out << j.dump() << '\n';
}

std::vector<EpochRecord> read_epoch_records(const std::string& run_dir) {
  if (!fs::is_directory(run_dir)) throw Error("io_error", "run directory " + run_dir + " not found");
  const auto path = fs::path(run_dir) / "epochs.jsonl";
  std::ifstream in(path);
  if (!in) throw Error("io_error", "no epochs.jsonl in " + run_dir);
  std::vector<EpochRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      EpochRecord r;
      r.epoch = j.at("epoch").get<std::size_t>();
      r.mean_reward = j.at("mean_reward").get<double>();
      r.mean_bsld = j.at("mean_bsld").get<double>();
      r.mean_baseline_bsld = j.value("mean_baseline_bsld", 0.0);
      r.steps = j.value("steps", std::size_t{0});
      r.violations = j.value("violations", std::size_t{0});
      r.policy_loss = j.value("policy_loss", 0.0);
      r.value_loss_start = j.value("value_loss_start", 0.0);
      r.value_loss_end = j.value("value_loss_end", 0.0);
      r.approx_kl = j.value("approx_kl", 0.0);
      records.push_back(r);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, std::string("bad epoch record: ") + e.what());
    }
  }
  return records;
}

std::string training_curve_csv(const std::vector<EpochRecord>& curve) {
  std::ostringstream out;
  out << "epoch,mean_reward,mean_bsld\n";
  for (const auto& r : curve) {
    out << r.epoch << ',' << fmt(r.mean_reward) << ',' << fmt(r.mean_bsld) << '\n';
  }
  return out.str();
}

std::string export_training_curve(const std::string& run_dir) {
  auto records = read_epoch_records(run_dir);
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].epoch <= records[i - 1].epoch) {
      throw Error("parse_error", "epoch records in " + run_dir + " are not increasing");
    }
  }
  return training_curve_csv(records);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io_error", "cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const std::string& path, const std::string& contents) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io_error", "cannot write " + path);
  out << contents;
}

std::string git_blob_hash(const std::string& path) {
  const auto contents = read_file(path);
  const auto header = "blob " + std::to_string(contents.size()) + std::string(1, '\0');
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
  EVP_DigestUpdate(ctx, header.data(), header.size());
  EVP_DigestUpdate(ctx, contents.data(), contents.size());
  EVP_DigestFinal_ex(ctx, digest, &length);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < length; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

void write_manifest(const std::string& dir, const std::string& command,
                    const std::map<std::string, std::string>& parameters,
                    const std::vector<std::string>& inputs, const std::vector<std::uint64_t>& seeds) {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["parameters"] = parameters;
  j["seeds"] = seeds;
  auto& hashes = j["inputs"];
  hashes = nlohmann::ordered_json::array();
  for (const auto& path : inputs) {
    hashes.push_back({{"path", path}, {"git_blob_sha1", git_blob_hash(path)}});
  }
  write_file((fs::path(dir) / "manifest.json").string(), j.dump(2) + "\n");
}

}  // namespace rlbf

namespace rlbf {

void apply_train_config_text(TrainConfig& config, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto eq = line.find('=');
    const auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
    };
    if (strip(line).empty()) continue;
    if (eq == std::string::npos) throw ParseError(line_no, "expected key = value");
    const auto key = strip(line.substr(0, eq));
    const auto value = strip(line.substr(eq + 1));
    try {
      std::size_t used = 0;
      const auto as_size = [&] {
        const auto v = std::stoull(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return static_cast<std::size_t>(v);
      };
      const auto as_double = [&] {
        const auto v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
      };
      if (key == "epochs") config.epochs = as_size();
      else if (key == "trajectories_per_epoch") config.trajectories_per_epoch = as_size();
      else if (key == "jobs_per_trajectory") config.jobs_per_trajectory = as_size();
      else if (key == "update_iterations") config.update_iterations = as_size();
      else if (key == "learning_rate") config.learning_rate = as_double();
      else if (key == "clip_ratio") config.clip_ratio = as_double();
      else if (key == "discount") config.discount = as_double();
      else if (key == "gae_lambda") config.gae_lambda = as_double();
      else if (key == "policy_hidden") config.policy_hidden = as_size();
      else if (key == "value_hidden") config.value_hidden = as_size();
      else if (key == "max_observed_jobs") config.max_observed_jobs = as_size();
      else if (key == "violation_penalty") config.violation_penalty = as_double();
      else if (key == "seed") config.seed = as_size();
      else throw ParseError(line_no, "unknown training key '" + key + "'");
    } catch (const std::logic_error&) {
      throw ParseError(line_no, "bad value for '" + key + "': '" + value + "'");
    }
  }
}

void apply_train_config_file(TrainConfig& config, const std::string& path) {
  apply_train_config_text(config, read_file(path));
}

}  // namespace rlbf
