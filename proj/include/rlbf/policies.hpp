#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rlbf/workload.hpp"

namespace rlbf {

/// Base scheduling policies. Lower score runs earlier.
enum class PolicyKind { Fcfs, Sjf, Wfp3, F1 };

PolicyKind parse_policy(std::string_view name);
std::string policy_name(PolicyKind kind);

/// Priority score of `job` at time `clock`. Throws on a non-finite result.
double score(PolicyKind kind, const Job& job, Seconds clock);

/// Sorts job indices ascending by score, ties by (submit time, id). Scores
/// are evaluated once per call, at `clock`.
void sort_queue(PolicyKind kind, std::span<const Job> jobs, std::vector<std::size_t>& queue,
                Seconds clock);

}  // namespace rlbf
