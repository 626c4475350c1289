#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fidsearch/clustering.hpp"
#include "fidsearch/features_io.hpp"
#include "fidsearch/fid.hpp"

namespace fidsearch {

// Per-cluster FIDs against the target and the sampling weights derived from them.
// Unscorable clusters carry +inf and receive exactly zero weight.
struct ClusterScores {
  std::vector<double> fids;
  std::vector<double> weights;
  std::vector<std::size_t> image_counts;
};

// softmax(-fids) with the minimum finite FID subtracted first; +inf entries get 0.
// Throws ValidationError if no entry is finite (or any is NaN).
std::vector<double> softmax_weights(std::span<const double> fids);

// FID of every cluster's image rows against the target; clusters with fewer
// than `min_cluster_images` images are unscorable. Clusters are scored
// concurrently and merged in cluster order.
ClusterScores score_clusters(const FidReference& target, const Clustering& clustering, const FeatureTable& table,
                             const IdentityIndex& index, std::size_t min_cluster_images = 2);
ClusterScores score_clusters(const FeatureTable& target, const Clustering& clustering, const FeatureTable& table,
                             const IdentityIndex& index, std::size_t min_cluster_images = 2);

struct Selection {
  std::vector<std::size_t> rows;                     // table rows in draw order
  std::map<std::string, double> per_identity_weight;  // drawn identity -> its probability mass
};

// Draws identities without replacement with probability proportional to
// `masses` (renormalized after each draw); each drawn identity contributes all
// of its images, the last one a random subset so exactly n rows are returned.
Selection draw_identities(std::span<const double> masses, const IdentityIndex& index, std::size_t n,
                          std::uint64_t seed);

// Identity mass w_k / |S_k| for the identities of cluster k (clustering order
// must match index order).
std::vector<double> identity_masses(const ClusterScores& scores, const Clustering& clustering,
                                    const IdentityIndex& index);

struct SearchParams {
  std::size_t k = 100;
  std::size_t n = 100;
  std::uint64_t seed = 0;
  KMeansParams kmeans;
  std::size_t min_cluster_images = 2;
};

struct SearchManifest {
  static constexpr int kFormatVersion = 1;

  std::string strategy = "greedy";
  std::vector<std::string> selected;  // image IDs, the searched training set
  std::map<std::string, double> per_identity_weight;
  SearchParams params;
  std::map<std::string, std::string> paths;  // config echo of the inputs, when run from files
  ClusterScores scores;
  std::vector<std::size_t> cluster_sizes;
  std::map<std::string, std::uint32_t> assignment;
  std::size_t kmeans_iterations = 0;
  double kmeans_inertia = 0.0;
  std::vector<std::size_t> selected_rows;  // not serialized
};

SearchManifest sample_training_set(const ClusterScores& scores, const Clustering& clustering,
                                   const FeatureTable& table, const IdentityIndex& index, std::size_t n,
                                   std::uint64_t seed);

// Cluster, score and sample: the whole search.
SearchManifest run_search(const FeatureTable& pool, const IdentityIndex& pool_index, const FeatureTable& target,
                          const SearchParams& params);

// Uniform identity sampling of n images: the random baseline.
SearchManifest random_selection(const FeatureTable& pool, const IdentityIndex& pool_index, std::size_t n,
                                std::uint64_t seed);

std::string manifest_to_json(const SearchManifest& manifest);
void write_manifest(const SearchManifest& manifest, const std::filesystem::path& json_path,
                    const std::filesystem::path& ids_path);

}  // namespace fidsearch
