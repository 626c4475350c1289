#include "fidsearch/search.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <numeric>

#include "fidsearch/errors.hpp"
#include "fidsearch/parallel.hpp"
#include "fidsearch/random.hpp"

namespace fidsearch {
namespace {

void check_consistent(const Clustering& clustering, const IdentityIndex& index) {
  if (clustering.assignment.size() != index.size() || clustering.identity_ids != index.identity_ids()) {
    throw_validation("clustering does not match the identity index");
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_io("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw_io("write failed for '" + path.string() + "'");
}

}  // namespace

std::vector<double> softmax_weights(std::span<const double> fids) {
  double best = std::numeric_limits<double>::infinity();
  for (double f : fids) {
    if (std::isnan(f)) throw_validation("cluster FID is NaN");
    if (f == -std::numeric_limits<double>::infinity()) throw_validation("cluster FID is -inf");
    best = std::min(best, f);
  }
  if (!std::isfinite(best)) throw_validation("no cluster could be scored: every FID is +inf");
  std::vector<double> weights(fids.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < fids.size(); ++i) {
    if (std::isfinite(fids[i])) {
      weights[i] = std::exp(-(fids[i] - best));
      total += weights[i];
    }
  }
  for (double& w : weights) w /= total;
  return weights;
}

ClusterScores score_clusters(const FidReference& target, const Clustering& clustering, const FeatureTable& table,
                             const IdentityIndex& index, std::size_t min_cluster_images) {
  check_consistent(clustering, index);
  if (min_cluster_images < 2) throw_validation("min_cluster_images must be at least 2");
  if (table.dim() != target.dim()) {
    throw_validation("pool dimension " + std::to_string(table.dim()) + " differs from target dimension " +
                     std::to_string(target.dim()));
  }
  const auto members = clustering.members();
  ClusterScores out;
  out.fids.assign(clustering.k(), std::numeric_limits<double>::infinity());
  out.image_counts.assign(clustering.k(), 0);
  std::vector<std::vector<std::size_t>> rows(clustering.k());
  for (std::size_t c = 0; c < clustering.k(); ++c) {
    for (std::size_t identity : members[c]) {
      const auto& r = index.rows_of(identity);
      rows[c].insert(rows[c].end(), r.begin(), r.end());
    }
    out.image_counts[c] = rows[c].size();
  }
  parallel_for(clustering.k(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t c = begin; c < end; ++c) {
      if (rows[c].size() >= min_cluster_images) out.fids[c] = target.distance(table, rows[c]);
    }
  });
  out.weights = softmax_weights(out.fids);
  return out;
}

ClusterScores score_clusters(const FeatureTable& target, const Clustering& clustering, const FeatureTable& table,
                             const IdentityIndex& index, std::size_t min_cluster_images) {
  return score_clusters(FidReference(to_matrix(target)), clustering, table, index, min_cluster_images);
}

std::vector<double> identity_masses(const ClusterScores& scores, const Clustering& clustering,
                                    const IdentityIndex& index) {
  check_consistent(clustering, index);
  if (scores.weights.size() != clustering.k()) throw_validation("scores and clustering disagree on k");
  std::vector<double> masses(index.size(), 0.0);
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto c = clustering.assignment[i];
    masses[i] = scores.weights[c] / static_cast<double>(clustering.sizes[c]);
  }
  return masses;
}

Selection draw_identities(std::span<const double> masses, const IdentityIndex& index, std::size_t n,
                          std::uint64_t seed) {
  if (n == 0) throw_validation("n must be at least 1");
  if (masses.size() != index.size()) throw_validation("one mass per identity is required");
  std::vector<double> remaining(masses.begin(), masses.end());
  std::size_t available = 0;
  for (std::size_t i = 0; i < remaining.size(); ++i) {
    if (!(remaining[i] >= 0.0) || !std::isfinite(remaining[i])) throw_validation("identity masses must be finite and >= 0");
    if (remaining[i] > 0.0) available += index.rows_of(i).size();
  }
  if (n > available) {
    throw_validation("n = " + std::to_string(n) + " exceeds the " + std::to_string(available) +
                     " images available in positive-weight clusters");
  }

  Rng rng(seed);
  Selection out;
  out.rows.reserve(n);
  while (out.rows.size() < n) {
    double total = 0.0;
    for (double m : remaining) total += m;
    double target = uniform01(rng) * total;
    std::size_t pick = remaining.size();
    for (std::size_t i = 0; i < remaining.size(); ++i) {
      if (remaining[i] <= 0.0) continue;
      pick = i;
      target -= remaining[i];
      if (target < 0.0) break;
    }
    out.per_identity_weight[index.identity_ids()[pick]] = masses[pick];
    remaining[pick] = 0.0;

    const auto& rows = index.rows_of(pick);
    const std::size_t need = n - out.rows.size();
    if (rows.size() <= need) {
      out.rows.insert(out.rows.end(), rows.begin(), rows.end());
    } else {
      std::vector<std::size_t> order(rows.size());
      std::iota(order.begin(), order.end(), 0);
      for (std::size_t i = 0; i < need; ++i) std::swap(order[i], order[i + uniform_index(rng, order.size() - i)]);
      order.resize(need);
      std::sort(order.begin(), order.end());
      for (std::size_t j : order) out.rows.push_back(rows[j]);
    }
  }
  return out;
}

SearchManifest sample_training_set(const ClusterScores& scores, const Clustering& clustering,
                                   const FeatureTable& table, const IdentityIndex& index, std::size_t n,
                                   std::uint64_t seed) {
  const auto masses = identity_masses(scores, clustering, index);
  Selection picked = draw_identities(masses, index, n, seed);
  SearchManifest out;
  out.scores = scores;
  out.cluster_sizes = clustering.sizes;
  for (std::size_t i = 0; i < clustering.assignment.size(); ++i) {
    out.assignment[clustering.identity_ids[i]] = clustering.assignment[i];
  }
  out.kmeans_iterations = clustering.iterations;
  out.kmeans_inertia = clustering.inertia;
  out.per_identity_weight = std::move(picked.per_identity_weight);
  for (std::size_t r : picked.rows) out.selected.push_back(table.ids()[r]);
  out.selected_rows = std::move(picked.rows);
  out.params.k = clustering.k();
  out.params.n = n;
  out.params.seed = seed;
  return out;
}

SearchManifest run_search(const FeatureTable& pool, const IdentityIndex& pool_index, const FeatureTable& target,
                          const SearchParams& params) {
  if (params.n == 0) throw_validation("n must be at least 1");
  if (target.dim() != pool.dim()) {
    throw_validation("target dimension " + std::to_string(target.dim()) + " differs from pool dimension " +
                     std::to_string(pool.dim()));
  }
  if (target.rows() < 2) throw_validation("target needs at least 2 rows");
  if (params.k > pool_index.size()) {
    throw_validation("k = " + std::to_string(params.k) + " exceeds the number of identities (" +
                     std::to_string(pool_index.size()) + ")");
  }
  const Clustering clustering =
      cluster_identities(pool, pool_index, params.k, derive_seed(params.seed, streams::kClustering), params.kmeans);
  const ClusterScores scores =
      score_clusters(FidReference(to_matrix(target)), clustering, pool, pool_index, params.min_cluster_images);
  SearchManifest out =
      sample_training_set(scores, clustering, pool, pool_index, params.n, derive_seed(params.seed, streams::kSampling));
  out.params = params;
  return out;
}

SearchManifest random_selection(const FeatureTable& pool, const IdentityIndex& pool_index, std::size_t n,
                                std::uint64_t seed) {
  const std::vector<double> masses(pool_index.size(), 1.0);
  Selection picked = draw_identities(masses, pool_index, n, derive_seed(seed, streams::kSampling));
  SearchManifest out;
  out.strategy = "random";
  out.params.k = 1;
  out.params.n = n;
  out.params.seed = seed;
  const double mass = 1.0 / static_cast<double>(pool_index.size());
  for (const auto& [identity, unused] : picked.per_identity_weight) {
    (void)unused;
    out.per_identity_weight[identity] = mass;
  }
  for (std::size_t r : picked.rows) out.selected.push_back(pool.ids()[r]);
  out.selected_rows = std::move(picked.rows);
  return out;
}

std::string manifest_to_json(const SearchManifest& m) {
  using nlohmann::json;
  json fids = json::array();
  for (double f : m.scores.fids) fids.push_back(std::isfinite(f) ? json(f) : json(nullptr));
  json config = {
      {"strategy", m.strategy},
      {"k", m.params.k},
      {"n", m.params.n},
      {"seed", m.params.seed},
      {"tol", m.params.kmeans.tol},
      {"max_iter", m.params.kmeans.max_iter},
      {"min_cluster_images", m.params.min_cluster_images},
      {"paths", m.paths},
  };
  json doc = {
      {"version", SearchManifest::kFormatVersion},
      {"config", config},
      {"seed", m.params.seed},
      {"cluster_fids", fids},
      {"weights", m.scores.weights},
      {"cluster_sizes", m.cluster_sizes},
      {"cluster_image_counts", m.scores.image_counts},
      {"kmeans", {{"iterations", m.kmeans_iterations}, {"inertia", m.kmeans_inertia}}},
      {"assignment", m.assignment},
      {"per_identity_weight", m.per_identity_weight},
      {"selected_ids", m.selected},
  };
  return doc.dump(2) + "\n";
}

void write_manifest(const SearchManifest& manifest, const std::filesystem::path& json_path,
                    const std::filesystem::path& ids_path) {
  write_text(json_path, manifest_to_json(manifest));
  std::string ids;
  for (const auto& id : manifest.selected) {
    ids += id;
    ids += '\n';
  }
  write_text(ids_path, ids);
}

}  // namespace fidsearch
