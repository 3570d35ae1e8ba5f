#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rlbf {

using Seconds = double;

/// One batch job. Static attributes come from the trace; `start_time` is
/// filled in by the simulator.
struct Job {
  std::int64_t id = 0;
  Seconds submit_time = 0;     // s_t
  int requested_nodes = 1;     // n_t
  Seconds requested_time = 1;  // r_t, user estimate and upper bound
  Seconds actual_runtime = 0;
  std::optional<Seconds> start_time;

  Seconds wait_time() const { return start_time ? *start_time - submit_time : 0.0; }

  bool operator==(const Job&) const = default;
};

struct Trace {
  std::vector<Job> jobs;  // sorted by submit_time
  int cluster_size = 0;
  bool has_request_time = true;
};

struct TraceStats {
  int size = 0;
  double mean_interarrival = 0;     // i_t
  double mean_requested_time = 0;   // r_t
  double mean_requested_nodes = 0;  // n_t
};

/// Reads the 18-field Standard Workload Format. Comment lines start with ';'.
/// Jobs with unknown runtime or node count are dropped; a missing request
/// time is replaced by the actual runtime; runtimes above the request are
/// clamped to it. Cluster size comes from the "MaxProcs" header, then
/// `cluster_size_override`, then the largest job.
Trace parse_swf(std::istream& in, std::optional<int> cluster_size_override = std::nullopt);
Trace parse_swf(std::string_view text, std::optional<int> cluster_size_override = std::nullopt);
Trace load_swf(const std::string& path, std::optional<int> cluster_size_override = std::nullopt,
               std::optional<std::size_t> max_jobs = std::nullopt);

/// Writes the SWF subset this project reads (fields 1, 2, 4, 5, 8, 9; the
/// rest are -1) with a MaxProcs header.
void write_swf(std::ostream& out, const Trace& trace);
std::string to_swf(const Trace& trace);

TraceStats compute_stats(const Trace& trace);
std::string stats_to_json(const TraceStats& stats);

/// Keeps the first `count` jobs (the experiments use the first 10K).
Trace head(const Trace& trace, std::size_t count);

/// Contiguous window of `length` jobs at a uniformly drawn start index,
/// shifted so the first job submits at t=0. Deterministic in `seed`.
Trace sample_sequence(const Trace& trace, std::size_t length, std::uint64_t seed);

/// Start index that sample_sequence(trace, length, seed) uses.
std::size_t sample_start_index(std::size_t trace_size, std::size_t length, std::uint64_t seed);

struct SyntheticSpec {
  std::size_t job_count = 10000;
  int cluster_size = 256;
  double mean_interarrival = 771;
  double runtime_log_mean = 7.36;  // mean runtime exp(7.36 + 1.5^2 / 2) ~ 4860 s
  double runtime_log_sigma = 1.5;
  int max_node_power = 7;
};

/// Poisson arrivals, lognormal runtimes, power-of-two node counts. Runtime
/// and request time are identical, so `has_request_time` is false.
Trace generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace rlbf
