#include <doctest.h>

#include <cmath>
#include <json.hpp>
#include <sstream>

#include "fidsearch/errors.hpp"
#include "fidsearch/evalharness.hpp"
#include "fidsearch/search.hpp"
#include "fidsearch/synth.hpp"

using namespace fidsearch;

namespace {

struct Fixture {
  SyntheticData pool;
  SyntheticData target;
};

Fixture small_fixture(std::size_t dim = 8, std::size_t pool = 600, std::size_t target = 60) {
  auto fx = standard_fixture(dim, 0, pool, target);
  return Fixture{generate(fx.pool), generate(fx.target)};
}

const ReportRow& find_row(const Report& r, const std::string& strategy, std::size_t n, std::uint64_t seed) {
  for (const auto& row : r.rows) {
    if (row.strategy == strategy && row.n == n && row.seed == seed) return row;
  }
  FAIL("row not found");
  return r.rows.front();
}

}  // namespace

TEST_CASE("selecting the whole pool makes both strategies equal") {
  auto fx = small_fixture();
  HarnessConfig config;
  config.k = 10;
  config.n_list = {fx.pool.table.rows()};
  config.seeds = seed_range(0, 3);
  auto report = compare_strategies(fx.pool.table, fx.pool.index, fx.target.table, config);
  CHECK(report.rows.size() == 6);
  for (auto seed : config.seeds) {
    const double g = find_row(report, "greedy", config.n_list[0], seed).fid;
    const double r = find_row(report, "random", config.n_list[0], seed).fid;
    CHECK(std::abs(g - r) <= 1e-9 * std::max(1.0, r));
  }
}

TEST_CASE("greedy rows match run_search exactly") {
  auto fx = small_fixture();
  HarnessConfig config;
  config.k = 12;
  config.n_list = {50, 120};
  config.seeds = {7};
  auto report = compare_strategies(fx.pool.table, fx.pool.index, fx.target.table, config);
  const FidReference reference(to_matrix(fx.target.table));
  for (std::size_t n : config.n_list) {
    SearchParams params;
    params.k = 12;
    params.n = n;
    params.seed = 7;
    auto manifest = run_search(fx.pool.table, fx.pool.index, fx.target.table, params);
    CHECK(find_row(report, "greedy", n, 7).fid == reference.distance(fx.pool.table, manifest.selected_rows));
    auto random = random_selection(fx.pool.table, fx.pool.index, n, 7);
    CHECK(find_row(report, "random", n, 7).fid == reference.distance(fx.pool.table, random.selected_rows));
  }
}

TEST_CASE("k = 1 behaves like uniform sampling") {
  auto fx = small_fixture();
  HarnessConfig config;
  config.k_list = {1};
  config.n_list = {100};
  config.seeds = seed_range(0, 8);
  auto sweep = sweep_k(fx.pool.table, fx.pool.index, fx.target.table, config);
  config.k = 1;
  auto compare = compare_strategies(fx.pool.table, fx.pool.index, fx.target.table, config);
  double greedy = 0, random = 0;
  for (auto seed : config.seeds) {
    greedy += find_row(sweep, "greedy", 100, seed).fid;
    random += find_row(compare, "random", 100, seed).fid;
  }
  CHECK(std::abs(greedy - random) <= 0.05 * random);
}

TEST_CASE("sweep over k finds an optimum above k = 1") {
  auto fx = small_fixture(16, 2000, 100);
  HarnessConfig config;
  config.k_list = {1, 2, 4, 8, 16};
  config.n_list = {100};
  config.seeds = seed_range(0, 3);
  auto report = sweep_k(fx.pool.table, fx.pool.index, fx.target.table, config);
  CHECK(report.kind == "sweep_k");
  CHECK(report.aggregates.size() == 5);
  const std::size_t best = best_k(report);
  CHECK(best >= 2);
  double at_one = 0, at_best = 0;
  for (const auto& a : report.aggregates) {
    if (a.k == 1) at_one = a.mean;
    if (a.k == best) at_best = a.mean;
  }
  CHECK(at_best < at_one);
}

TEST_CASE("k equal to the identity count scores multi-image identities") {
  const std::size_t d = 4;
  const Matrix eye = Matrix::Identity(d, d);
  // identities with 1 or 3 images: only the latter form scorable clusters
  PopulationSpec pool{d, 1, "p_", {GroupSpec{"one", 0.5, Vector::Zero(d), eye, 20, 1},
                                   GroupSpec{"three", 0.5, Vector::Zero(d), eye, 20, 3}}};
  PopulationSpec target{d, 2, "t_", {GroupSpec{"t", 1.0, Vector::Zero(d), eye, 30, 1}}};
  auto p = generate(pool);
  auto t = generate(target);
  auto clustering = cluster_identities(p.table, p.index, p.index.size(), 0);
  auto scores = score_clusters(t.table, clustering, p.table, p.index);
  for (std::size_t c = 0; c < clustering.k(); ++c) {
    CHECK(std::isfinite(scores.fids[c]) == (scores.image_counts[c] >= 2));
    if (scores.image_counts[c] < 2) CHECK(scores.weights[c] == 0.0);
  }
  HarnessConfig config;
  config.k = p.index.size();
  config.n_list = {20};
  config.seeds = {1, 2};
  auto report = compare_strategies(p.table, p.index, t.table, config);
  for (const auto& r : report.rows) CHECK(std::isfinite(r.fid));

  auto singles = small_fixture(4, 60, 20);
  config.k = singles.pool.index.size();
  CHECK_THROWS_AS(compare_strategies(singles.pool.table, singles.pool.index, singles.target.table, config),
                  ValidationError);
}

TEST_CASE("aggregates are recomputable from rows") {
  auto fx = small_fixture();
  HarnessConfig config;
  config.k = 8;
  config.n_list = {40, 80};
  config.seeds = seed_range(3, 4);
  auto report = compare_strategies(fx.pool.table, fx.pool.index, fx.target.table, config);
  CHECK(report.aggregates.size() == 4);
  for (const auto& a : report.aggregates) {
    std::vector<double> values;
    for (const auto& r : report.rows) {
      if (r.strategy == a.strategy && r.n == a.n && r.k == a.k) values.push_back(r.fid);
    }
    REQUIRE(values.size() == a.runs);
    double mean = 0;
    for (double v : values) mean += v;
    mean /= double(values.size());
    double ss = 0;
    for (double v : values) ss += (v - mean) * (v - mean);
    CHECK(std::abs(a.mean - mean) <= 1e-9 * std::max(1.0, mean));
    CHECK(std::abs(a.stddev - std::sqrt(ss / double(values.size() - 1))) <= 1e-9 * std::max(1.0, mean));
  }
  CHECK(aggregate({ReportRow{"greedy", 3, 10, 0, 2.5}})[0].stddev == 0.0);
}

TEST_CASE("reports are deterministic and well-formed") {
  auto fx = small_fixture();
  HarnessConfig config;
  config.k = 6;
  config.n_list = {30};
  config.seeds = seed_range(0, 3);
  auto a = compare_strategies(fx.pool.table, fx.pool.index, fx.target.table, config);
  auto b = compare_strategies(fx.pool.table, fx.pool.index, fx.target.table, config);
  CHECK(report_csv(a) == report_csv(b));
  CHECK(report_json(a) == report_json(b));

  const std::string csv = report_csv(a);
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "strategy,k,n,seed,fid");
  std::size_t count = 0;
  while (std::getline(lines, line)) {
    ++count;
    if (line.rfind("random,", 0) == 0) CHECK(line.rfind("random,0,30,", 0) == 0);
  }
  CHECK(count == a.rows.size());

  auto doc = nlohmann::json::parse(report_json(a));
  CHECK(doc["kind"] == "compare");
  CHECK(doc["greedy_wins"]["30"]["seeds"] == 3);
  CHECK(doc["aggregates"].size() == 2);
}

TEST_CASE("harness argument errors") {
  auto fx = small_fixture(4, 60, 20);
  HarnessConfig config;
  config.k = 4;
  config.n_list = {10};
  CHECK_THROWS_AS(compare_strategies(fx.pool.table, fx.pool.index, fx.target.table, config), ValidationError);
  config.seeds = {0};
  config.k_list = {0};
  CHECK_THROWS_AS(sweep_k(fx.pool.table, fx.pool.index, fx.target.table, config), ValidationError);
  config.k_list = {1000};
  CHECK_THROWS_AS(sweep_k(fx.pool.table, fx.pool.index, fx.target.table, config), ValidationError);
  Report empty{"sweep_k", {}, {}};
  CHECK_THROWS_AS(best_k(empty), ValidationError);
}
