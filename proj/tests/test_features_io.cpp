#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <unistd.h>

#include "fidsearch/errors.hpp"
#include "fidsearch/features_io.hpp"

using namespace fidsearch;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("fidsearch_io_" + std::to_string(std::random_device{}()) + "_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::string le32(std::uint32_t v) {
  std::string s(4, '\0');
  for (int i = 0; i < 4; ++i) s[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  return s;
}

std::string fsf(std::uint32_t n, std::uint32_t d, const std::vector<float>& values) {
  std::string s = "FSF1" + le32(n) + le32(d);
  for (float v : values) s += le32(std::bit_cast<std::uint32_t>(v));
  return s;
}

FeatureTable small_table() { return FeatureTable({"img1", "img2", "img3"}, {1, 2, 3, 4, 5, 6}, 2); }

}  // namespace

TEST_CASE("binary file built by hand loads with the declared shape") {
  TempDir tmp;
  const auto p = tmp.path / "t.fsf";
  write_bytes(p, fsf(3, 2, {0.5f, -1.0f, 2.0f, 3.0f, 4.25f, 5.0f}));
  write_bytes(ids_sidecar_path(p), "a\nb\nc\n");
  const auto t = load_features(p);
  CHECK(t.rows() == 3);
  CHECK(t.dim() == 2);
  CHECK(t.ids() == std::vector<std::string>{"a", "b", "c"});
  CHECK(t.row(0)[0] == 0.5f);
  CHECK(t.row(2)[0] == 4.25f);
}

TEST_CASE("save_features writes the documented byte layout") {
  TempDir tmp;
  SUBCASE("1x1 table has a 4-byte payload") {
    const auto p = tmp.path / "one.fsf";
    save_features(FeatureTable({"x"}, {0.0f}, 1), p);
    const auto bytes = read_bytes(p);
    CHECK(bytes.size() == 12 + 4);
    CHECK(bytes.substr(0, 4) == "FSF1");
    CHECK(read_bytes(ids_sidecar_path(p)) == "x\n");
  }
  SUBCASE("2x3 table is row-major with a 24-byte payload") {
    const auto p = tmp.path / "two.fsf";
    FeatureTable t({"r0", "r1"}, {1, 2, 3, 4, 5, 6}, 3);
    save_features(t, p);
    const auto bytes = read_bytes(p);
    CHECK(bytes == fsf(2, 3, {1, 2, 3, 4, 5, 6}));
    CHECK(bytes.size() - 12 == 24);
    CHECK(load_features(p).row(1)[0] == 4.0f);
  }
}

TEST_CASE("binary round trip is bit exact, including awkward floats") {
  TempDir tmp;
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::uint32_t> bits;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + trial % 5, d = 1 + (trial * 3) % 7;
    std::vector<float> data;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("id" + std::to_string(i));
    for (std::size_t i = 0; i < n * d; ++i) {
      float v;
      do {
        v = std::bit_cast<float>(bits(rng));
      } while (!std::isfinite(v));
      data.push_back(v);
    }
    data[0] = -0.0f;
    FeatureTable t(ids, data, d);
    const auto p = tmp.path / "rt.fsf";
    save_features(t, p);
    const auto back = load_features(p);
    REQUIRE(back == t);
    CHECK(std::memcmp(back.data().data(), t.data().data(), n * d * 4) == 0);
  }
}

TEST_CASE("csv round trip preserves values within 1e-6") {
  TempDir tmp;
  std::mt19937_64 rng(11);
  std::normal_distribution<float> normal(0.0f, 100.0f);
  std::vector<float> data(40);
  for (auto& v : data) v = normal(rng);
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) ids.push_back("row" + std::to_string(i));
  FeatureTable t(ids, data, 4);
  const auto p = tmp.path / "t.csv";
  save_features(t, p);
  const auto back = load_features(p);
  REQUIRE(back.ids() == t.ids());
  for (std::size_t i = 0; i < data.size(); ++i) CHECK(std::abs(back.data()[i] - data[i]) <= 1e-6);
}

TEST_CASE("csv validation errors name the offending cell") {
  TempDir tmp;
  const auto p = tmp.path / "bad.csv";
  write_bytes(p, "id,a,b\nx,1,2\ny,3,NaN\n");
  try {
    load_features(p);
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 1") != std::string::npos);
    CHECK(msg.find("column 1") != std::string::npos);
  }
  write_bytes(p, "name,a\nx,1\n");
  CHECK_THROWS_AS(load_features(p), ValidationError);
  write_bytes(p, "id,a,b\nx,1\n");
  CHECK_THROWS_AS(load_features(p), ValidationError);
  write_bytes(p, "id,a\nx,1\nx,2\n");
  CHECK_THROWS_WITH_AS(load_features(p), doctest::Contains("duplicate"), ValidationError);
  write_bytes(p, "id,a\nx,abc\n");
  CHECK_THROWS_AS(load_features(p), ValidationError);
}

TEST_CASE("binary validation errors") {
  TempDir tmp;
  const auto p = tmp.path / "bad.fsf";
  write_bytes(ids_sidecar_path(p), "a\nb\n");
  SUBCASE("bad magic") {
    write_bytes(p, "FSF2" + le32(2) + le32(1) + le32(0) + le32(0));
    CHECK_THROWS_WITH_AS(load_features(p), doctest::Contains("magic"), ValidationError);
  }
  SUBCASE("payload shorter than header") {
    write_bytes(p, fsf(2, 2, {1, 2, 3}));
    CHECK_THROWS_WITH_AS(load_features(p), doctest::Contains("payload"), ValidationError);
  }
  SUBCASE("non-finite value reports row and column") {
    write_bytes(p, fsf(2, 2, {1, 2, 3, std::numeric_limits<float>::infinity()}));
    CHECK_THROWS_WITH_AS(load_features(p), doctest::Contains("row 1"), ValidationError);
  }
  SUBCASE("sidecar line count") {
    write_bytes(p, fsf(3, 1, {1, 2, 3}));
    CHECK_THROWS_AS(load_features(p), ValidationError);
  }
  SUBCASE("duplicate IDs") {
    write_bytes(ids_sidecar_path(p), "a\na\n");
    write_bytes(p, fsf(2, 1, {1, 2}));
    CHECK_THROWS_WITH_AS(load_features(p), doctest::Contains("duplicate"), ValidationError);
  }
  SUBCASE("empty header") {
    write_bytes(p, fsf(0, 3, {}));
    CHECK_THROWS_AS(load_features(p), ValidationError);
  }
  SUBCASE("missing file is an I/O error") {
    CHECK_THROWS_AS(load_features(tmp.path / "absent.fsf"), IoError);
  }
}

TEST_CASE("saving into a missing directory is an I/O error") {
  TempDir tmp;
  CHECK_THROWS_AS(save_features(small_table(), tmp.path / "no" / "such" / "dir" / "t.fsf"), IoError);
  CHECK_THROWS_AS(save_features(small_table(), tmp.path / "no" / "t.csv"), IoError);
}

TEST_CASE("corrupted binary files either fail validation or load a valid table") {
  TempDir tmp;
  const auto p = tmp.path / "c.fsf";
  FeatureTable base({"a", "b", "c", "d"}, {1, 2, 3, 4, 5, 6, 7, 8}, 2);
  save_features(base, p);
  const std::string good = read_bytes(p);
  std::mt19937_64 rng(3);
  int rejected = 0;
  for (int trial = 0; trial < 300; ++trial) {
    std::string bytes = good;
    const int flips = 1 + trial % 4;
    for (int f = 0; f < flips; ++f) {
      bytes[rng() % bytes.size()] = static_cast<char>(rng() & 0xFF);
    }
    if (trial % 5 == 0) bytes.resize(rng() % bytes.size());
    write_bytes(p, bytes);
    try {
      const auto t = load_features(p);
      CHECK(t.rows() >= 1);
      CHECK(t.dim() >= 1);
      CHECK(t.data().size() == t.rows() * t.dim());
      for (float v : t.data()) CHECK(std::isfinite(v));
      std::set<std::string> unique(t.ids().begin(), t.ids().end());
      CHECK(unique.size() == t.rows());
    } catch (const ValidationError&) {
      ++rejected;
    }
  }
  CHECK(rejected > 0);
}

TEST_CASE("identity manifests") {
  const auto table = small_table();
  SUBCASE("two identities over three images") {
    auto idx = parse_identities("idA\timg1\nidA\timg2\nidB\timg3\n", table);
    REQUIRE(idx.size() == 2);
    CHECK(idx.identity_ids() == std::vector<std::string>{"idA", "idB"});
    CHECK(idx.rows_of(0) == std::vector<std::size_t>{0, 1});
    CHECK(idx.rows_of(1) == std::vector<std::size_t>{2});
    CHECK(idx.identity_of_row(2) == 1);
    CHECK(idx.image_count() == 3);
  }
  SUBCASE("attributes are parsed and merged") {
    auto idx = parse_identities("idA\timg1\tgroup=x\nidA\timg2\nidB\timg3\tgroup=y\tsite=2\n", table);
    CHECK(idx.attrs_of(0).at("group") == "x");
    CHECK(idx.attrs_of(1).at("site") == "2");
    CHECK_THROWS_AS(parse_identities("idA\timg1\tgroup=x\nidA\timg2\tgroup=z\nidB\timg3\n", table), ValidationError);
  }
  SUBCASE("unknown image") {
    CHECK_THROWS_WITH_AS(parse_identities("idA\timg1\nidA\timg2\nidB\timg3\nidC\timg9\n", table),
                         doctest::Contains("img9"), ValidationError);
  }
  SUBCASE("image claimed twice") {
    CHECK_THROWS_WITH_AS(parse_identities("idA\timg1\nidB\timg1\nidB\timg2\nidC\timg3\n", table),
                         doctest::Contains("claimed"), ValidationError);
  }
  SUBCASE("empty identity") {
    CHECK_THROWS_AS(parse_identities("idA\t\nidB\timg1\n", table), ValidationError);
    CHECK_THROWS_AS(IdentityIndex(table, {{"idA", {"img1", "img2", "img3"}}, {"idB", {}}}), ValidationError);
  }
  SUBCASE("unassigned image") {
    CHECK_THROWS_WITH_AS(parse_identities("idA\timg1\nidB\timg3\n", table), doctest::Contains("img2"),
                         ValidationError);
  }
  SUBCASE("no manifest gives singletons") {
    FeatureTable five({"e", "d", "c", "b", "a"}, {1, 2, 3, 4, 5}, 1);
    auto idx = load_identities(std::nullopt, five);
    CHECK(idx.size() == 5);
    CHECK(idx.identity_ids().front() == "a");
    CHECK(idx.rows_of(0) == std::vector<std::size_t>{4});
  }
}

TEST_CASE("identity manifest save/load round trip") {
  TempDir tmp;
  const auto table = small_table();
  auto idx = parse_identities("idB\timg3\tgroup=y\nidA\timg1\tgroup=x\nidA\timg2\tgroup=x\n", table);
  save_identities(idx, table, tmp.path / "m.tsv");
  auto back = load_identities(tmp.path / "m.tsv", table);
  CHECK(back.identity_ids() == idx.identity_ids());
  CHECK(back.rows_of(0) == idx.rows_of(0));
  CHECK(back.attrs_of(1) == idx.attrs_of(1));
}
