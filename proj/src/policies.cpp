#include "rlbf/policies.hpp"

#include <algorithm>
#include <cmath>

#include "rlbf/error.hpp"

namespace rlbf {

PolicyKind parse_policy(std::string_view name) {
  if (name == "fcfs") return PolicyKind::Fcfs;
  if (name == "sjf") return PolicyKind::Sjf;
  if (name == "wfp3") return PolicyKind::Wfp3;
  if (name == "f1") return PolicyKind::F1;
  throw Error("config_error", "unknown policy '" + std::string(name) + "'");
}

std::string policy_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::Fcfs: return "fcfs";
    case PolicyKind::Sjf: return "sjf";
    case PolicyKind::Wfp3: return "wfp3";
    case PolicyKind::F1: return "f1";
  }
  return "?";
}

double score(PolicyKind kind, const Job& job, Seconds clock) {
  const double s = job.submit_time;
  const double r = std::max(1.0, job.requested_time);
  const double n = job.requested_nodes;
  double value = 0;
  switch (kind) {
    case PolicyKind::Fcfs:
      value = s;
      break;
    case PolicyKind::Sjf:
      value = r;
      break;
    case PolicyKind::Wfp3: {
      const double w = std::max(0.0, clock - s);
      const double ratio = w / r;
      value = -(ratio * ratio * ratio) * n;
      break;
    }
    case PolicyKind::F1:
      // log10(0) is undefined; shifted sequences start at s=0.
      value = std::log10(r) * n + 870.0 * std::log10(std::max(s, 1.0));
      break;
  }
  if (!std::isfinite(value)) {
    throw Error("scoring_error", "non-finite " + policy_name(kind) + " score for job " +
                                     std::to_string(job.id));
  }
  return value;
}

void sort_queue(PolicyKind kind, std::span<const Job> jobs, std::vector<std::size_t>& queue,
                Seconds clock) {
  struct Keyed {
    double score;
    double submit;
    std::int64_t id;
    std::size_t index;
  };
  std::vector<Keyed> keyed;
  keyed.reserve(queue.size());
  for (auto i : queue) {
    keyed.push_back({score(kind, jobs[i], clock), jobs[i].submit_time, jobs[i].id, i});
  }
  std::sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
    if (a.score != b.score) return a.score < b.score;
    if (a.submit != b.submit) return a.submit < b.submit;
    if (a.id != b.id) return a.id < b.id;
    return a.index < b.index;
  });
  for (std::size_t k = 0; k < keyed.size(); ++k) queue[k] = keyed[k].index;
}

}  // namespace rlbf
