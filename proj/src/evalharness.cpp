#include "fidsearch/evalharness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <map>
#include <tuple>

#include "fidsearch/errors.hpp"
#include "fidsearch/fid.hpp"
#include "fidsearch/parallel.hpp"
#include "fidsearch/random.hpp"
#include "fidsearch/search.hpp"

namespace fidsearch {
namespace {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void sort_rows(std::vector<ReportRow>& rows) {
  std::sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    return std::tie(a.strategy, a.n, a.k, a.seed) < std::tie(b.strategy, b.n, b.k, b.seed);
  });
}

void check_config(const FeatureTable& pool, const FeatureTable& target, const HarnessConfig& config) {
  if (config.seeds.empty()) throw_validation("at least one seed is required");
  if (pool.dim() != target.dim()) throw_validation("pool and target dimensions differ");
}

}  // namespace

std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t count) {
  std::vector<std::uint64_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = first + i;
  return out;
}

std::vector<AggregateRow> aggregate(const std::vector<ReportRow>& rows) {
  std::map<std::tuple<std::string, std::size_t, std::size_t>, std::vector<double>> groups;
  for (const auto& r : rows) groups[{r.strategy, r.n, r.k}].push_back(r.fid);
  std::vector<AggregateRow> out;
  for (const auto& [key, values] : groups) {
    AggregateRow a;
    std::tie(a.strategy, a.n, a.k) = key;
    a.runs = values.size();
    double sum = 0.0;
    for (double v : values) sum += v;
    a.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
      double ss = 0.0;
      for (double v : values) ss += (v - a.mean) * (v - a.mean);
      a.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    out.push_back(a);
  }
  return out;
}

Report compare_strategies(const FeatureTable& pool, const IdentityIndex& pool_index, const FeatureTable& target,
                          const HarnessConfig& config) {
  check_config(pool, target, config);
  if (config.n_list.empty()) throw_validation("n list is empty");
  const FidReference reference(to_matrix(target));
  const std::size_t per_seed = 2 * config.n_list.size();
  std::vector<ReportRow> rows(config.seeds.size() * per_seed);

  parallel_for(config.seeds.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t s = begin; s < end; ++s) {
      const std::uint64_t seed = config.seeds[s];
      const Clustering clustering =
          cluster_identities(pool, pool_index, config.k, derive_seed(seed, streams::kClustering), config.kmeans);
      const ClusterScores scores = score_clusters(reference, clustering, pool, pool_index, config.min_cluster_images);
      for (std::size_t i = 0; i < config.n_list.size(); ++i) {
        const std::size_t n = config.n_list[i];
        const auto greedy =
            sample_training_set(scores, clustering, pool, pool_index, n, derive_seed(seed, streams::kSampling));
        const auto random = random_selection(pool, pool_index, n, seed);
        rows[s * per_seed + 2 * i] = {"greedy", config.k, n, seed, reference.distance(pool, greedy.selected_rows)};
        rows[s * per_seed + 2 * i + 1] = {"random", 0, n, seed, reference.distance(pool, random.selected_rows)};
      }
    }
  });
  sort_rows(rows);
  return Report{"compare", rows, aggregate(rows)};
}

Report sweep_k(const FeatureTable& pool, const IdentityIndex& pool_index, const FeatureTable& target,
               const HarnessConfig& config) {
  check_config(pool, target, config);
  if (config.k_list.empty()) throw_validation("k list is empty");
  if (config.n_list.empty()) throw_validation("n is required");
  for (std::size_t k : config.k_list) {
    if (k == 0 || k > pool_index.size()) {
      throw_validation("k = " + std::to_string(k) + " is outside [1, " + std::to_string(pool_index.size()) + "]");
    }
  }
  const std::size_t n = config.n_list.front();
  const FidReference reference(to_matrix(target));
  const std::size_t nk = config.k_list.size();
  std::vector<ReportRow> rows(config.seeds.size() * nk);
  parallel_for(config.seeds.size() * nk, [&](std::size_t begin, std::size_t end) {
    for (std::size_t job = begin; job < end; ++job) {
      const std::uint64_t seed = config.seeds[job / nk];
      const std::size_t k = config.k_list[job % nk];
      const Clustering clustering =
          cluster_identities(pool, pool_index, k, derive_seed(seed, streams::kClustering), config.kmeans);
      const ClusterScores scores = score_clusters(reference, clustering, pool, pool_index, config.min_cluster_images);
      const auto greedy =
          sample_training_set(scores, clustering, pool, pool_index, n, derive_seed(seed, streams::kSampling));
      rows[job] = {"greedy", k, n, seed, reference.distance(pool, greedy.selected_rows)};
    }
  });
  sort_rows(rows);
  return Report{"sweep_k", rows, aggregate(rows)};
}

std::size_t best_k(const Report& report) {
  std::size_t best = 0;
  double best_mean = std::numeric_limits<double>::infinity();
  for (const auto& a : report.aggregates) {
    if (a.strategy != "greedy") continue;
    if (a.mean < best_mean || (a.mean == best_mean && a.k < best)) {
      best = a.k;
      best_mean = a.mean;
    }
  }
  if (best == 0) throw_validation("report has no greedy rows");
  return best;
}

std::string report_csv(const Report& report) {
  std::string out = "strategy,k,n,seed,fid\n";
  for (const auto& r : report.rows) {
    out += r.strategy + "," + std::to_string(r.k) + "," + std::to_string(r.n) + "," + std::to_string(r.seed) + "," +
           format_double(r.fid) + "\n";
  }
  return out;
}

std::string report_json(const Report& report) {
  using nlohmann::json;
  json aggregates = json::array();
  for (const auto& a : report.aggregates) {
    aggregates.push_back(
        {{"strategy", a.strategy}, {"k", a.k}, {"n", a.n}, {"runs", a.runs}, {"mean_fid", a.mean}, {"std_fid", a.stddev}});
  }
  json doc = {{"kind", report.kind}, {"aggregates", aggregates}, {"rows", report.rows.size()}};
  if (report.kind == "sweep_k") doc["best_k"] = best_k(report);
  if (report.kind == "compare") {
    json by_n = json::object();
    std::map<std::size_t, std::pair<std::size_t, std::size_t>> wins;  // n -> (greedy wins, seeds)
    std::map<std::pair<std::size_t, std::uint64_t>, double> greedy;
    for (const auto& r : report.rows) {
      if (r.strategy == "greedy") greedy[{r.n, r.seed}] = r.fid;
    }
    for (const auto& r : report.rows) {
      if (r.strategy != "random") continue;
      auto it = greedy.find({r.n, r.seed});
      if (it == greedy.end()) continue;
      auto& w = wins[r.n];
      ++w.second;
      if (it->second < r.fid) ++w.first;
    }
    for (const auto& [n, w] : wins) by_n[std::to_string(n)] = {{"greedy_wins", w.first}, {"seeds", w.second}};
    doc["greedy_wins"] = by_n;
  }
  return doc.dump(2) + "\n";
}

}  // namespace fidsearch
