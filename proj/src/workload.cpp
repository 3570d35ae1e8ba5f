#include "rlbf/workload.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "rlbf/error.hpp"

namespace rlbf {
namespace {

constexpr std::size_t kSwfFields = 18;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double parse_field(std::string_view token, std::size_t line, int field) {
  double value = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(value)) {
    throw ParseError(line, "field " + std::to_string(field) + " is not a number: '" +
                               std::string(token) + "'");
  }
  return value;
}

// "; MaxProcs: 128" -> 128
std::optional<int> header_max_procs(std::string_view comment) {
  comment = trim(comment.substr(1));
  constexpr std::string_view key = "MaxProcs:";
  if (comment.substr(0, key.size()) != key) return std::nullopt;
  const auto value = trim(comment.substr(key.size()));
  int procs = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), procs);
  if (ec != std::errc() || procs <= 0) return std::nullopt;
  return procs;
}

void append_number(std::string& out, double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

}  // namespace

Trace parse_swf(std::istream& in, std::optional<int> cluster_size_override) {
  Trace trace;
  std::optional<int> max_procs;
  bool any_request_time = false;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string_view> tokens;
  tokens.reserve(kSwfFields);

  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty()) continue;
    if (body.front() == ';') {
      if (auto procs = header_max_procs(body)) max_procs = procs;
      continue;
    }

    tokens.clear();
    std::size_t pos = 0;
    while (pos < body.size()) {
      const auto start = body.find_first_not_of(" \t", pos);
      if (start == std::string_view::npos) break;
      auto end = body.find_first_of(" \t", start);
      if (end == std::string_view::npos) end = body.size();
      tokens.push_back(body.substr(start, end - start));
      pos = end;
    }
    if (tokens.size() < 9) {
      throw ParseError(line_no, "expected at least 9 fields, got " + std::to_string(tokens.size()));
    }

    std::vector<double> f(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      f[i] = parse_field(tokens[i], line_no, static_cast<int>(i + 1));
    }

    const double runtime = f[3];
    const double allocated = f[4];
    const double requested_procs = f[7];
    const double requested_time = f[8];

    const double nodes = requested_procs > 0 ? requested_procs : allocated;
    if (runtime <= 0 || nodes <= 0) continue;

    Job job;
    job.id = static_cast<std::int64_t>(f[0]);
    job.submit_time = std::max(0.0, f[1]);
    job.requested_nodes = static_cast<int>(nodes);
    if (requested_time > 0) {
      any_request_time = true;
      job.requested_time = requested_time;
    } else {
      job.requested_time = runtime;
    }
    job.requested_time = std::max(1.0, job.requested_time);
    job.actual_runtime = std::min(runtime, job.requested_time);
    trace.jobs.push_back(job);
  }

  if (trace.jobs.empty()) throw Error("empty_trace", "trace contains no usable jobs");

  std::stable_sort(trace.jobs.begin(), trace.jobs.end(),
                   [](const Job& a, const Job& b) { return a.submit_time < b.submit_time; });

  int largest = 0;
  for (const auto& j : trace.jobs) largest = std::max(largest, j.requested_nodes);
  trace.cluster_size = max_procs.value_or(cluster_size_override.value_or(largest));
  trace.has_request_time = any_request_time;

  // A job larger than the machine can never run; SWF archives contain a few.
  std::erase_if(trace.jobs, [&](const Job& j) { return j.requested_nodes > trace.cluster_size; });
  if (trace.jobs.empty()) throw Error("empty_trace", "no job fits the cluster");
  return trace;
}

Trace parse_swf(std::string_view text, std::optional<int> cluster_size_override) {
  std::istringstream in{std::string(text)};
  return parse_swf(in, cluster_size_override);
}

Trace load_swf(const std::string& path, std::optional<int> cluster_size_override,
               std::optional<std::size_t> max_jobs) {
  std::ifstream in(path);
  if (!in) throw Error("io_error", "cannot open trace file " + path);
  auto trace = parse_swf(in, cluster_size_override);
  if (max_jobs) trace = head(trace, *max_jobs);
  return trace;
}

void write_swf(std::ostream& out, const Trace& trace) { out << to_swf(trace); }

std::string to_swf(const Trace& trace) {
  std::string out;
  out += "; MaxProcs: " + std::to_string(trace.cluster_size) + "\n";
  out += "; MaxJobs: " + std::to_string(trace.jobs.size()) + "\n";
  for (const auto& j : trace.jobs) {
    const double fields[kSwfFields] = {
        static_cast<double>(j.id), j.submit_time, -1, j.actual_runtime,
        static_cast<double>(j.requested_nodes), -1, -1,
        static_cast<double>(j.requested_nodes), j.requested_time,
        -1, 1, -1, -1, -1, -1, -1, -1, -1};
    for (std::size_t i = 0; i < kSwfFields; ++i) {
      if (i) out += ' ';
      append_number(out, fields[i]);
    }
    out += '\n';
  }
  return out;
}

TraceStats compute_stats(const Trace& trace) {
  TraceStats stats;
  stats.size = trace.cluster_size;
  const auto n = trace.jobs.size();
  if (n == 0) return stats;
  double r_sum = 0, n_sum = 0;
  for (const auto& j : trace.jobs) {
    r_sum += j.requested_time;
    n_sum += j.requested_nodes;
  }
  stats.mean_requested_time = r_sum / static_cast<double>(n);
  stats.mean_requested_nodes = n_sum / static_cast<double>(n);
  if (n > 1) {
    // Telescoping sum of consecutive differences.
    stats.mean_interarrival =
        (trace.jobs.back().submit_time - trace.jobs.front().submit_time) / static_cast<double>(n - 1);
  }
  return stats;
}

std::string stats_to_json(const TraceStats& stats) {
  nlohmann::ordered_json j;
  j["size"] = stats.size;
  j["i_t"] = stats.mean_interarrival;
  j["r_t"] = stats.mean_requested_time;
  j["n_t"] = stats.mean_requested_nodes;
  return j.dump(2);
}

Trace head(const Trace& trace, std::size_t count) {
  Trace out = trace;
  if (out.jobs.size() > count) out.jobs.resize(count);
  return out;
}

std::size_t sample_start_index(std::size_t trace_size, std::size_t length, std::uint64_t seed) {
  if (length == 0 || length > trace_size) {
    throw Error("sample_error", "cannot sample " + std::to_string(length) + " jobs from a trace of " +
                                    std::to_string(trace_size));
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, trace_size - length);
  return pick(rng);
}

Trace sample_sequence(const Trace& trace, std::size_t length, std::uint64_t seed) {
  const auto start = sample_start_index(trace.jobs.size(), length, seed);
  Trace out;
  out.cluster_size = trace.cluster_size;
  out.has_request_time = trace.has_request_time;
  out.jobs.assign(trace.jobs.begin() + static_cast<std::ptrdiff_t>(start),
                  trace.jobs.begin() + static_cast<std::ptrdiff_t>(start + length));
  const double origin = out.jobs.front().submit_time;
  for (auto& j : out.jobs) {
    j.submit_time -= origin;
    j.start_time.reset();
  }
  return out;
}

Trace generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.job_count == 0) throw Error("empty_trace", "synthetic trace needs at least one job");
  if (spec.cluster_size <= 0 || spec.mean_interarrival <= 0 || spec.runtime_log_sigma <= 0 ||
      spec.max_node_power < 0) {
    throw Error("config_error", "synthetic trace parameters must be positive");
  }
  if ((1LL << spec.max_node_power) > spec.cluster_size) {
    throw Error("config_error", "2^max_node_power exceeds the cluster size");
  }

  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> gap(1.0 / spec.mean_interarrival);
  std::lognormal_distribution<double> runtime(spec.runtime_log_mean, spec.runtime_log_sigma);
  std::uniform_int_distribution<int> power(0, spec.max_node_power);

  Trace trace;
  trace.cluster_size = spec.cluster_size;
  trace.has_request_time = false;
  trace.jobs.reserve(spec.job_count);
  double clock = 0;
  for (std::size_t i = 0; i < spec.job_count; ++i) {
    if (i > 0) clock += gap(rng);
    Job job;
    job.id = static_cast<std::int64_t>(i + 1);
    job.submit_time = std::floor(clock);
    job.actual_runtime = std::max(1.0, std::round(runtime(rng)));
    job.requested_time = job.actual_runtime;
    job.requested_nodes = 1 << power(rng);
    trace.jobs.push_back(job);
  }
  return trace;
}

}  // namespace rlbf
