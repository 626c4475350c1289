#include "fidsearch/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "fidsearch/errors.hpp"
#include "fidsearch/kernels.hpp"
#include "fidsearch/parallel.hpp"
#include "fidsearch/random.hpp"

namespace fidsearch {
namespace {

void copy_row(PointMatrix& dst, std::size_t i, const float* src) {
  std::copy(src, src + dst.dim, dst.data.begin() + static_cast<std::ptrdiff_t>(i * dst.dim));
}

// RMS distance of the points to their mean; the unit for the convergence tolerance.
double point_scale(const PointMatrix& points) {
  std::vector<double> mean(points.dim, 0.0);
  for (std::size_t i = 0; i < points.rows; ++i) kernels::accumulate(mean.data(), points.row(i), points.dim);
  std::vector<float> center(points.dim);
  for (std::size_t j = 0; j < points.dim; ++j) center[j] = static_cast<float>(mean[j] / static_cast<double>(points.rows));
  double total = 0.0;
  for (std::size_t i = 0; i < points.rows; ++i) total += kernels::squared_distance(points.row(i), center.data(), points.dim);
  return std::sqrt(total / static_cast<double>(points.rows));
}

PointMatrix plus_plus_init(const PointMatrix& points, std::size_t k, Rng& rng) {
  const std::size_t m = points.rows;
  const std::size_t d = points.dim;
  PointMatrix centers{std::vector<float>(k * d), k, d};
  std::vector<char> chosen(m, 0);
  std::vector<double> dist(m, std::numeric_limits<double>::infinity());

  std::size_t pick = uniform_index(rng, m);
  for (std::size_t c = 0; c < k; ++c) {
    if (c > 0) {
      double total = 0.0;
      for (double v : dist) total += v;
      if (total > 0.0) {
        double target = uniform01(rng) * total;
        pick = m;
        for (std::size_t i = 0; i < m; ++i) {
          if (dist[i] <= 0.0) continue;
          target -= dist[i];
          pick = i;
          if (target < 0.0) break;
        }
      } else {
        // Every remaining point coincides with a center: pick uniformly among unchosen ones.
        std::vector<std::size_t> open;
        for (std::size_t i = 0; i < m; ++i) {
          if (!chosen[i]) open.push_back(i);
        }
        pick = open[uniform_index(rng, open.size())];
      }
    }
    chosen[pick] = 1;
    copy_row(centers, c, points.row(pick));
    const float* center = centers.row(c);
    parallel_for(m, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        dist[i] = std::min(dist[i], kernels::squared_distance(points.row(i), center, d));
      }
    });
  }
  return centers;
}

void assign_points(const PointMatrix& points, const PointMatrix& centers, std::vector<std::uint32_t>& labels,
                   std::vector<double>& dist) {
  parallel_for(points.rows, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      auto best = kernels::nearest(points.row(i), centers.data.data(), centers.rows, points.dim);
      labels[i] = static_cast<std::uint32_t>(best.index);
      dist[i] = best.distance;
    }
  });
}

// Moves the point farthest from its centroid (taken from a cluster that can
// spare it) into each empty cluster.
void repair_empty(const PointMatrix& points, PointMatrix& centers, std::vector<std::uint32_t>& labels,
                  std::vector<double>& dist, std::vector<std::size_t>& sizes) {
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    if (sizes[c] > 0) continue;
    std::size_t far = points.rows;
    double far_dist = -1.0;
    for (std::size_t i = 0; i < points.rows; ++i) {
      if (sizes[labels[i]] > 1 && dist[i] > far_dist) {
        far = i;
        far_dist = dist[i];
      }
    }
    if (far == points.rows) throw NumericError("k-means could not repair an empty cluster");
    --sizes[labels[far]];
    labels[far] = static_cast<std::uint32_t>(c);
    sizes[c] = 1;
    dist[far] = 0.0;
    copy_row(centers, c, points.row(far));
  }
}

// Cluster means of the current labels; returns the largest centroid shift.
double update_centers(const PointMatrix& points, const std::vector<std::uint32_t>& labels,
                      const std::vector<std::size_t>& sizes, PointMatrix& centers) {
  const std::size_t d = points.dim;
  std::vector<double> sums(centers.rows * d, 0.0);
  for (std::size_t i = 0; i < points.rows; ++i) kernels::accumulate(sums.data() + labels[i] * d, points.row(i), d);
  double max_shift = 0.0;
  for (std::size_t c = 0; c < centers.rows; ++c) {
    const double inv = 1.0 / static_cast<double>(sizes[c]);
    double shift = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const auto next = static_cast<float>(sums[c * d + j] * inv);
      const double delta = static_cast<double>(next) - static_cast<double>(centers.data[c * d + j]);
      shift += delta * delta;
      centers.data[c * d + j] = next;
    }
    max_shift = std::max(max_shift, std::sqrt(shift));
  }
  return max_shift;
}

}  // namespace

std::vector<std::vector<std::size_t>> Clustering::members() const {
  std::vector<std::vector<std::size_t>> out(k());
  for (std::size_t i = 0; i < assignment.size(); ++i) out[assignment[i]].push_back(i);
  return out;
}

IdentityFeatures identity_features(const FeatureTable& table, const IdentityIndex& index) {
  if (index.size() == 0) throw_validation("identity index is empty");
  IdentityFeatures out;
  out.identity_ids = index.identity_ids();
  const std::size_t d = table.dim();
  out.points = PointMatrix{std::vector<float>(index.size() * d), index.size(), d};
  std::vector<double> acc(d);
  for (std::size_t i = 0; i < index.size(); ++i) {
    std::fill(acc.begin(), acc.end(), 0.0);
    const auto& rows = index.rows_of(i);
    for (std::size_t r : rows) {
      if (r >= table.rows()) throw_validation("identity index does not match the feature table");
      kernels::accumulate(acc.data(), table.row(r).data(), d);
    }
    const double inv = 1.0 / static_cast<double>(rows.size());
    for (std::size_t j = 0; j < d; ++j) out.points.data[i * d + j] = static_cast<float>(acc[j] * inv);
  }
  return out;
}

Clustering kmeans(const PointMatrix& points, std::size_t k, std::uint64_t seed, const KMeansParams& params) {
  const std::size_t m = points.rows;
  if (k == 0) throw_validation("k must be at least 1");
  if (m == 0 || points.dim == 0) throw_validation("k-means needs a non-empty point set");
  if (k > m) throw_validation("k = " + std::to_string(k) + " exceeds the number of points (" + std::to_string(m) + ")");
  if (points.data.size() != m * points.dim) throw_validation("point matrix size does not match its shape");
  if (params.max_iter == 0) throw_validation("max_iter must be at least 1");
  if (!(params.tol >= 0.0)) throw_validation("tol must be non-negative");

  Rng rng(seed);
  Clustering out;
  out.centroids = plus_plus_init(points, k, rng);
  const double threshold = params.tol * point_scale(points);

  std::vector<std::uint32_t> labels(m, 0);
  std::vector<double> dist(m, 0.0);
  std::vector<std::size_t> sizes(k, 0);
  for (std::size_t iter = 0; iter < params.max_iter; ++iter) {
    assign_points(points, out.centroids, labels, dist);
    std::fill(sizes.begin(), sizes.end(), 0);
    for (auto l : labels) ++sizes[l];
    repair_empty(points, out.centroids, labels, dist, sizes);
    double inertia = 0.0;
    for (double v : dist) inertia += v;
    out.inertia_history.push_back(inertia);
    const double shift = update_centers(points, labels, sizes, out.centroids);
    out.iterations = iter + 1;
    if (shift <= threshold) {
      out.converged = true;
      break;
    }
  }

  // Final centroids are the exact means of the final assignment.
  double inertia = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    inertia += kernels::squared_distance(points.row(i), out.centroids.row(labels[i]), points.dim);
  }
  out.inertia = inertia;
  out.assignment = std::move(labels);
  out.sizes = std::move(sizes);
  return out;
}

Clustering cluster_identities(const FeatureTable& table, const IdentityIndex& index, std::size_t k, std::uint64_t seed,
                              const KMeansParams& params) {
  auto features = identity_features(table, index);
  Clustering out = kmeans(features.points, k, seed, params);
  out.identity_ids = std::move(features.identity_ids);
  return out;
}

void save_clustering(const Clustering& clustering, const std::filesystem::path& assignment_path,
                     const std::filesystem::path& centroid_path) {
  if (clustering.identity_ids.size() != clustering.assignment.size()) {
    throw_validation("clustering has no identity labels to write");
  }
  {
    std::ofstream out(assignment_path, std::ios::binary | std::ios::trunc);
    if (!out) throw_io("cannot open '" + assignment_path.string() + "' for writing");
    for (std::size_t i = 0; i < clustering.assignment.size(); ++i) {
      out << clustering.identity_ids[i] << '\t' << clustering.assignment[i] << '\n';
    }
    if (!out) throw_io("write failed for '" + assignment_path.string() + "'");
  }
  std::vector<std::string> ids;
  for (std::size_t c = 0; c < clustering.k(); ++c) ids.push_back("cluster_" + std::to_string(c));
  FeatureTable centroids(std::move(ids), clustering.centroids.data, clustering.centroids.dim);
  save_features(centroids, centroid_path, FeatureFormat::Binary);
}

}  // namespace fidsearch
