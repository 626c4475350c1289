#include <doctest.h>

#include <cmath>

#include "fidsearch/errors.hpp"
#include "fidsearch/fid.hpp"
#include "fidsearch/synth.hpp"

using namespace fidsearch;

namespace {

GroupSpec group(const std::string& name, double proportion, std::size_t d, double offset, std::size_t identities,
                std::size_t images = 1) {
  return GroupSpec{name, proportion, Vector::Constant(static_cast<Eigen::Index>(d), offset),
                   Matrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)), identities, images};
}

}  // namespace

TEST_CASE("single group population") {
  PopulationSpec spec{2, 5, "", {group("g", 1.0, 2, 0.0, 10)}};
  auto data = generate(spec);
  CHECK(data.table.rows() == 10);
  CHECK(data.table.dim() == 2);
  CHECK(data.index.size() == 10);
  for (std::size_t i = 0; i < data.index.size(); ++i) CHECK(data.index.attrs_of(i).at("group") == "g");
}

TEST_CASE("three-group proportions give exact counts") {
  const std::vector<double> proportions{0.7608, 0.1473, 0.0919};
  CHECK(allocate_counts(10000, proportions) == std::vector<std::size_t>{7608, 1473, 919});
  CHECK(allocate_counts(8000, proportions) == std::vector<std::size_t>{6087, 1178, 735});
  const std::string json = R"({"dim": 2, "seed": 1, "total_identities": 10000, "groups": [
      {"name": "white", "proportion": 0.7608},
      {"name": "black", "proportion": 0.1473, "mean": 6},
      {"name": "asian", "proportion": 0.0919, "mean": [0, 6]}]})";
  auto spec = spec_from_json(json);
  auto data = generate(spec);
  std::map<std::string, std::size_t> counts;
  for (std::size_t i = 0; i < data.index.size(); ++i) ++counts[data.index.attrs_of(i).at("group")];
  CHECK(counts["white"] == 7608);
  CHECK(counts["black"] == 1473);
  CHECK(counts["asian"] == 919);
}

TEST_CASE("groups 6 sigma apart are far apart in FID") {
  const std::size_t d = 4;
  Vector far = Vector::Zero(d);
  far(0) = 6.0;
  PopulationSpec a{d, 1, "a_", {group("a", 1.0, d, 0.0, 400)}};
  PopulationSpec b{d, 2, "b_", {GroupSpec{"b", 1.0, far, Matrix::Identity(d, d), 400, 1}}};
  const double gap = fid(summarize(generate(a).table), summarize(generate(b).table));
  CHECK(gap >= 30.0);  // ||delta mu||^2 = 36
}

TEST_CASE("group sample means converge to the spec means") {
  const std::size_t d = 8, m = 4000;
  PopulationSpec spec{d, 9, "", {group("g", 1.0, d, 2.5, m)}};
  auto data = generate(spec);
  const auto s = summarize(data.table);
  // per-image variance = identity spread (1) + image jitter (0.1)
  const double sigma = std::sqrt(1.1);
  for (std::size_t j = 0; j < d; ++j) CHECK(std::abs(s.mean(j) - 2.5) <= 4.0 * sigma / std::sqrt(double(m)));
  for (std::size_t j = 0; j < d; ++j) CHECK(std::abs(s.cov(j, j) - 1.1) <= 0.1);
}

TEST_CASE("generation is deterministic under the seed") {
  PopulationSpec spec{3, 42, "", {group("x", 0.5, 3, 0.0, 20, 2), group("y", 0.5, 3, 3.0, 20, 2)}};
  auto a = generate(spec);
  auto b = generate(spec);
  CHECK(a.table == b.table);
  spec.seed = 43;
  CHECK_FALSE(generate(spec).table == a.table);
}

TEST_CASE("multi-image identities share an identity mean") {
  PopulationSpec spec{2, 3, "", {group("g", 1.0, 2, 0.0, 5, 4)}};
  auto data = generate(spec);
  CHECK(data.table.rows() == 20);
  CHECK(data.index.size() == 5);
  CHECK(data.index.rows_of(0).size() == 4);
  CHECK(data.table.ids()[1] == "g_0_1");
}

TEST_CASE("full covariance groups use the given covariance") {
  Matrix cov(2, 2);
  cov << 2.0, 1.5, 1.5, 2.0;
  PopulationSpec spec{2, 4, "", {GroupSpec{"g", 1.0, Vector::Zero(2), cov, 5000, 1}}};
  const auto s = summarize(generate(spec).table);
  CHECK(std::abs(s.cov(0, 1) - 1.1 * 1.5) <= 0.15);
}

TEST_CASE("invalid specs are rejected") {
  Matrix indefinite(2, 2);
  indefinite << 1, 3, 3, 1;
  PopulationSpec spec{2, 1, "", {GroupSpec{"g", 1.0, Vector::Zero(2), indefinite, 5, 1}}};
  CHECK_THROWS_AS(generate(spec), ValidationError);

  PopulationSpec bad_sum{2, 1, "", {group("a", 0.5, 2, 0, 5), group("b", 0.4, 2, 0, 4)}};
  CHECK_THROWS_WITH_AS(validate_spec(bad_sum), doctest::Contains("sum"), ValidationError);

  PopulationSpec bad_counts{2, 1, "", {group("a", 0.5, 2, 0, 9), group("b", 0.5, 2, 0, 1)}};
  CHECK_THROWS_AS(validate_spec(bad_counts), ValidationError);

  PopulationSpec dup{2, 1, "", {group("a", 0.5, 2, 0, 5), group("a", 0.5, 2, 0, 5)}};
  CHECK_THROWS_AS(validate_spec(dup), ValidationError);

  CHECK_THROWS_AS(spec_from_json("{not json"), ValidationError);
  CHECK_THROWS_AS(spec_from_json(R"({"dim": 2, "groups": [{"name": "a", "proportion": 1.0}]})"), ValidationError);
  CHECK_THROWS_AS(spec_from_json(R"({"dim": 2, "groups": [{"name": "a", "proportion": 1.0, "identities": 3,
                                     "diag": [1, -1]}]})"),
                  ValidationError);
}

TEST_CASE("standard fixture shape") {
  auto fx = standard_fixture(16, 0, 800, 30);
  auto pool = generate(fx.pool);
  auto target = generate(fx.target);
  CHECK(pool.table.rows() == 800);
  CHECK(target.table.rows() == 30);
  CHECK(target.index.attrs_of(0).at("group") == kMinorityGroup);
  CHECK(pool.table.ids().front().rfind("pool_", 0) == 0);
  CHECK((fx.pool.groups[1].mean - fx.pool.groups[0].mean).norm() == doctest::Approx(6.0));
}
