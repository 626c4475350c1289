#include "fidsearch/synth.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <json.hpp>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "fidsearch/errors.hpp"
#include "fidsearch/random.hpp"

namespace fidsearch {
namespace {

bool is_diagonal(const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (i != j && m(i, j) != 0.0) return false;
    }
  }
  return true;
}

// Factor F with F F^T = cov; diagonal covariances keep a diagonal factor.
Matrix covariance_factor(const Matrix& cov) {
  if (is_diagonal(cov)) return cov.diagonal().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericError("eigendecomposition of a group covariance failed");
  return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

std::string padded(std::size_t i, std::size_t count) {
  const std::size_t width = std::to_string(count > 0 ? count - 1 : 0).size();
  std::ostringstream os;
  os << std::setw(static_cast<int>(width)) << std::setfill('0') << i;
  return os.str();
}

Vector read_vector(const nlohmann::json& j, std::size_t dim, const std::string& what) {
  if (j.is_number()) return Vector::Constant(static_cast<Eigen::Index>(dim), j.get<double>());
  if (!j.is_array() || j.size() != dim) throw_validation(what + " must be a number or an array of " + std::to_string(dim));
  Vector v(static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < dim; ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

}  // namespace

std::vector<std::size_t> allocate_counts(std::size_t total, const std::vector<double>& proportions) {
  std::vector<std::size_t> counts(proportions.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < proportions.size(); ++i) {
    const double exact = proportions[i] * static_cast<double>(total);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[i];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < total && r < remainders.size(); ++r, ++assigned) ++counts[remainders[r].second];
  return counts;
}

void validate_spec(const PopulationSpec& spec) {
  if (spec.dim == 0) throw_validation("population dim must be >= 1");
  if (spec.groups.empty()) throw_validation("population needs at least one group");
  double sum = 0.0;
  std::size_t total = 0;
  std::set<std::string> names;
  for (const auto& g : spec.groups) {
    if (g.name.empty() || g.name.find_first_of("\t\n\r=") != std::string::npos) {
      throw_validation("group name '" + g.name + "' is empty or contains tab/newline/'='");
    }
    if (!names.insert(g.name).second) throw_validation("duplicate group name '" + g.name + "'");
    if (!(g.proportion > 0.0)) throw_validation("group '" + g.name + "' needs a proportion > 0");
    if (g.identities < 1 || g.images_per_identity < 1) {
      throw_validation("group '" + g.name + "' needs at least one identity and one image per identity");
    }
    if (static_cast<std::size_t>(g.mean.size()) != spec.dim) throw_validation("group '" + g.name + "' mean has wrong size");
    if (static_cast<std::size_t>(g.cov.rows()) != spec.dim || static_cast<std::size_t>(g.cov.cols()) != spec.dim) {
      throw_validation("group '" + g.name + "' covariance has wrong shape");
    }
    if (!g.mean.allFinite() || !g.cov.allFinite()) throw_validation("group '" + g.name + "' has non-finite parameters");
    if (is_diagonal(g.cov)) {
      if (g.cov.diagonal().minCoeff() < 0.0) throw_validation("group '" + g.name + "' covariance has a negative variance");
    } else {
      try {
        validate_stats(GaussianStats{g.mean, g.cov, 2});
      } catch (const ValidationError& e) {
        throw_validation("group '" + g.name + "': " + e.what());
      }
    }
    sum += g.proportion;
    total += g.identities;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw_validation("group proportions sum to " + std::to_string(sum) + ", not 1");
  for (const auto& g : spec.groups) {
    const double expected = g.proportion * static_cast<double>(total);
    if (std::abs(expected - static_cast<double>(g.identities)) > 1.0) {
      throw_validation("group '" + g.name + "' has " + std::to_string(g.identities) +
                       " identities but its proportion implies " + std::to_string(expected));
    }
  }
}

SyntheticData generate(const PopulationSpec& spec) {
  validate_spec(spec);
  const auto d = static_cast<Eigen::Index>(spec.dim);
  Rng rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&] {
    Vector z(d);
    for (Eigen::Index i = 0; i < d; ++i) z(i) = normal(rng);
    return z;
  };

  std::vector<std::string> ids;
  std::vector<float> data;
  std::map<std::string, std::vector<std::string>> identities;
  std::map<std::string, IdentityIndex::Attrs> attrs;
  const double jitter = std::sqrt(0.1);
  for (const auto& g : spec.groups) {
    const Matrix factor = covariance_factor(g.cov);
    const bool diagonal = is_diagonal(g.cov);
    const Vector diag = diagonal ? Vector(factor.diagonal()) : Vector();
    auto shaped = [&](const Vector& z) -> Vector { return diagonal ? Vector(diag.cwiseProduct(z)) : Vector(factor * z); };
    for (std::size_t i = 0; i < g.identities; ++i) {
      const std::string identity = spec.id_prefix + g.name + "_" + padded(i, g.identities);
      const Vector center = g.mean + shaped(draw());
      auto& images = identities[identity];
      attrs[identity]["group"] = g.name;
      for (std::size_t j = 0; j < g.images_per_identity; ++j) {
        const Vector x = center + jitter * shaped(draw());
        std::string image = identity;
        if (g.images_per_identity > 1) image += "_" + padded(j, g.images_per_identity);
        ids.push_back(image);
        images.push_back(image);
        for (Eigen::Index c = 0; c < d; ++c) data.push_back(static_cast<float>(x(c)));
      }
    }
  }
  FeatureTable table(std::move(ids), std::move(data), spec.dim);
  IdentityIndex index(table, identities, std::move(attrs));
  return SyntheticData{std::move(table), std::move(index)};
}

PopulationSpec spec_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw_validation(std::string("population spec is not valid JSON: ") + e.what());
  }
  try {
    PopulationSpec spec;
    spec.dim = j.at("dim").get<std::size_t>();
    spec.seed = j.value("seed", std::uint64_t{0});
    spec.id_prefix = j.value("id_prefix", std::string());
    if (spec.dim == 0) throw_validation("population dim must be >= 1");
    const auto& groups = j.at("groups");
    if (!groups.is_array() || groups.empty()) throw_validation("'groups' must be a non-empty array");
    std::vector<double> proportions;
    for (const auto& gj : groups) proportions.push_back(gj.at("proportion").get<double>());
    std::vector<std::size_t> counts;
    if (j.contains("total_identities")) counts = allocate_counts(j["total_identities"].get<std::size_t>(), proportions);
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
      const auto& gj = groups[gi];
      GroupSpec g;
      g.name = gj.at("name").get<std::string>();
      g.proportion = proportions[gi];
      if (gj.contains("identities")) {
        g.identities = gj["identities"].get<std::size_t>();
      } else if (!counts.empty()) {
        g.identities = counts[gi];
      } else {
        throw_validation("group '" + g.name + "' needs 'identities' (or give 'total_identities')");
      }
      g.images_per_identity = gj.value("images_per_identity", std::size_t{1});
      g.mean = gj.contains("mean") ? read_vector(gj["mean"], spec.dim, "mean") : Vector::Zero(static_cast<Eigen::Index>(spec.dim));
      if (gj.contains("cov")) {
        const auto& cj = gj["cov"];
        if (!cj.is_array() || cj.size() != spec.dim) throw_validation("'cov' must be a dim x dim array");
        g.cov.resize(static_cast<Eigen::Index>(spec.dim), static_cast<Eigen::Index>(spec.dim));
        for (std::size_t r = 0; r < spec.dim; ++r) {
          if (!cj[r].is_array() || cj[r].size() != spec.dim) throw_validation("'cov' must be a dim x dim array");
          for (std::size_t c = 0; c < spec.dim; ++c) {
            g.cov(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = cj[r][c].get<double>();
          }
        }
      } else if (gj.contains("diag")) {
        g.cov = read_vector(gj["diag"], spec.dim, "diag").asDiagonal();
      } else {
        const double var = gj.value("variance", 1.0);
        g.cov = var * Matrix::Identity(static_cast<Eigen::Index>(spec.dim), static_cast<Eigen::Index>(spec.dim));
      }
      spec.groups.push_back(std::move(g));
    }
    validate_spec(spec);
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw_validation(std::string("population spec: ") + e.what());
  }
}

FixtureSpec standard_fixture(std::size_t dim, std::uint64_t seed, std::size_t pool_identities,
                             std::size_t target_identities) {
  if (dim < 2) throw_validation("the standard fixture needs dim >= 2");
  const auto d = static_cast<Eigen::Index>(dim);
  const double separation = 6.0;
  const Eigen::Index half = d / 2;
  // Minority means sit 6 sigma from the majority, on disjoint coordinate halves.
  Vector black = Vector::Zero(d);
  Vector asian = Vector::Zero(d);
  black.head(half).setConstant(separation / std::sqrt(static_cast<double>(half)));
  asian.tail(d - half).setConstant(separation / std::sqrt(static_cast<double>(d - half)));
  const Matrix cov = Matrix::Identity(d, d);

  const std::vector<std::string> names = {"white", kMinorityGroup, "asian"};
  const std::vector<double> proportions = {0.7608, 0.1473, 0.0919};
  const std::vector<Vector> means = {Vector::Zero(d), black, asian};
  const auto counts = allocate_counts(pool_identities, proportions);

  FixtureSpec out;
  out.pool.dim = dim;
  out.pool.seed = derive_seed(seed, streams::kSynthPool);
  out.pool.id_prefix = "pool_";
  for (std::size_t g = 0; g < names.size(); ++g) {
    out.pool.groups.push_back(GroupSpec{names[g], proportions[g], means[g], cov, counts[g], 1});
  }
  out.target.dim = dim;
  out.target.seed = derive_seed(seed, streams::kSynthTarget);
  out.target.id_prefix = "target_";
  out.target.groups.push_back(GroupSpec{kMinorityGroup, 1.0, black, cov, target_identities, 1});
  return out;
}

}  // namespace fidsearch
