#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fidsearch/features_io.hpp"

namespace fidsearch {

// Row-major m x d float matrix of clustering points.
struct PointMatrix {
  std::vector<float> data;
  std::size_t rows = 0;
  std::size_t dim = 0;

  const float* row(std::size_t i) const { return data.data() + i * dim; }
};

struct IdentityFeatures {
  std::vector<std::string> identity_ids;  // lexicographic
  PointMatrix points;                     // row i = mean feature of identity i
};

// One point per identity: the arithmetic mean of its image rows.
IdentityFeatures identity_features(const FeatureTable& table, const IdentityIndex& index);

struct KMeansParams {
  std::size_t max_iter = 300;
  // Convergence when the largest centroid shift is <= tol * RMS distance of the points to their mean.
  double tol = 1e-4;
};

struct Clustering {
  std::vector<std::string> identity_ids;  // same order as the clustered points
  std::vector<std::uint32_t> assignment;  // cluster of each identity, in [0, k)
  PointMatrix centroids;                  // k x d
  std::vector<std::size_t> sizes;         // identities per cluster, all >= 1
  double inertia = 0.0;                   // final within-cluster sum of squared distances
  std::vector<double> inertia_history;    // one entry per Lloyd iteration
  std::size_t iterations = 0;
  bool converged = false;

  std::size_t k() const { return sizes.size(); }
  std::vector<std::vector<std::size_t>> members() const;  // point indices per cluster
};

// Seeded k-means++ initialization followed by Lloyd iterations. Empty clusters
// are re-seeded with the point farthest from its centroid. The assignment step
// runs in parallel; centroid updates sum in point order, so results are
// independent of the thread count.
Clustering kmeans(const PointMatrix& points, std::size_t k, std::uint64_t seed, const KMeansParams& params = {});

// Clusters identity-averaged features and labels the result with identity IDs.
Clustering cluster_identities(const FeatureTable& table, const IdentityIndex& index, std::size_t k, std::uint64_t seed,
                              const KMeansParams& params = {});

// `identity<TAB>cluster` lines plus a binary centroid table (FSF1 + sidecar).
void save_clustering(const Clustering& clustering, const std::filesystem::path& assignment_path,
                     const std::filesystem::path& centroid_path);

}  // namespace fidsearch
