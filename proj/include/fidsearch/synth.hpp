#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fidsearch/features_io.hpp"
#include "fidsearch/fid.hpp"

namespace fidsearch {

struct GroupSpec {
  std::string name;
  double proportion = 0.0;
  Vector mean;
  Matrix cov;
  std::size_t identities = 1;
  std::size_t images_per_identity = 1;
};

struct PopulationSpec {
  std::size_t dim = 0;
  std::uint64_t seed = 0;
  std::string id_prefix;  // prepended to identity and image IDs
  std::vector<GroupSpec> groups;
};

struct SyntheticData {
  FeatureTable table;
  IdentityIndex index;  // attrs carry group=<name>
};

// Throws ValidationError on empty groups, bad proportions (must be > 0, sum to
// 1 and agree with the identity counts to within one identity), shape
// mismatches, or a covariance that is not symmetric PSD.
void validate_spec(const PopulationSpec& spec);

// Identity means ~ N(group mean, cov); images ~ N(identity mean, 0.1 * cov).
SyntheticData generate(const PopulationSpec& spec);

// Largest-remainder split of `total` by `proportions` (ties to the lower index).
std::vector<std::size_t> allocate_counts(std::size_t total, const std::vector<double>& proportions);

// JSON population description, see README for the schema.
PopulationSpec spec_from_json(const std::string& text);

// The pool/target pair used by tests, the acceptance suite and `synth --fixture standard`:
// a three-group pool (76.08% / 14.73% / 9.19% of `pool_identities`
// single-image identities; group means 6 sigma apart) and a target drawn from
// the 14.73% group.
struct FixtureSpec {
  PopulationSpec pool;
  PopulationSpec target;
};
FixtureSpec standard_fixture(std::size_t dim = 64, std::uint64_t seed = 0, std::size_t pool_identities = 8000,
                             std::size_t target_identities = 300);

inline constexpr const char* kMinorityGroup = "black";

}  // namespace fidsearch
