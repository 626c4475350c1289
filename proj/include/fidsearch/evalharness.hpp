#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fidsearch/clustering.hpp"
#include "fidsearch/features_io.hpp"

namespace fidsearch {

struct ReportRow {
  std::string strategy;  // "greedy" or "random"
  std::size_t k = 0;     // 0 for the random baseline
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double fid = 0.0;      // FID(target, selected set)
};

struct AggregateRow {
  std::string strategy;
  std::size_t k = 0;
  std::size_t n = 0;
  std::size_t runs = 0;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for a single run
};

struct Report {
  std::string kind;  // "compare" or "sweep_k"
  std::vector<ReportRow> rows;             // sorted by (strategy, n, k, seed)
  std::vector<AggregateRow> aggregates;    // sorted by (strategy, n, k)
};

struct HarnessConfig {
  std::size_t k = 100;
  std::vector<std::size_t> n_list{100, 500, 1000};
  std::vector<std::size_t> k_list{1, 2, 4, 8, 16, 32};
  std::vector<std::uint64_t> seeds;  // one run per seed
  KMeansParams kmeans;
  std::size_t min_cluster_images = 2;
};

// Seeds first, first + 1, ..., first + count - 1.
std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t count);

// Greedy search vs uniform identity sampling, per n and seed. The clustering
// of a seed is shared by all n, exactly as run_search would recompute it.
Report compare_strategies(const FeatureTable& pool, const IdentityIndex& pool_index, const FeatureTable& target,
                          const HarnessConfig& config);

// Greedy search FID for each k in config.k_list at n = config.n_list.front().
Report sweep_k(const FeatureTable& pool, const IdentityIndex& pool_index, const FeatureTable& target,
               const HarnessConfig& config);

// Recomputes aggregates from rows.
std::vector<AggregateRow> aggregate(const std::vector<ReportRow>& rows);

// k with the lowest mean FID among the greedy aggregates (ties: smallest k).
std::size_t best_k(const Report& report);

std::string report_csv(const Report& report);
std::string report_json(const Report& report);

}  // namespace fidsearch
