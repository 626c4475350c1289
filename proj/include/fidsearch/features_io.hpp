#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace fidsearch {

enum class FeatureFormat { Binary, Csv };

// Picks Csv for a ".csv" extension, Binary otherwise.
FeatureFormat format_from_path(const std::filesystem::path& path);

// Immutable n x d float32 matrix (row-major) with one unique ID per row.
// Every instance satisfies: n >= 1, d >= 1, all values finite, IDs unique.
class FeatureTable {
 public:
  // Validates and takes ownership; throws ValidationError on any violation.
  FeatureTable(std::vector<std::string> ids, std::vector<float> data, std::size_t dim);

  std::size_t rows() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<float>& data() const { return data_; }

  std::span<const float> row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  std::optional<std::size_t> find(const std::string& id) const;

  // New table holding the given rows, in the given order.
  FeatureTable subset(std::span<const std::size_t> rows) const;

  bool operator==(const FeatureTable& other) const {
    return dim_ == other.dim_ && ids_ == other.ids_ && data_ == other.data_;
  }

 private:
  std::vector<std::string> ids_;
  std::vector<float> data_;
  std::size_t dim_;
  std::unordered_map<std::string, std::size_t> lookup_;
};

// Grouping of a table's rows into identities. Identities are kept in
// lexicographic order of their IDs; images inside an identity keep manifest order.
class IdentityIndex {
 public:
  using Attrs = std::map<std::string, std::string>;

  IdentityIndex() = default;

  // identity -> image IDs; attrs optional. Throws ValidationError when an image
  // is unknown, claimed twice, missing from every identity, or an identity is empty.
  IdentityIndex(const FeatureTable& table,
                const std::map<std::string, std::vector<std::string>>& identities,
                std::map<std::string, Attrs> attrs = {});

  // One identity per image, named after the image.
  static IdentityIndex singletons(const FeatureTable& table);

  std::size_t size() const { return ids_.size(); }
  std::size_t image_count() const { return image_count_; }
  const std::vector<std::string>& identity_ids() const { return ids_; }
  // Row indices (into the companion table) of identity i.
  const std::vector<std::size_t>& rows_of(std::size_t i) const { return rows_[i]; }
  std::optional<std::size_t> find(const std::string& identity) const;
  const Attrs& attrs_of(std::size_t i) const { return attrs_[i]; }
  std::size_t identity_of_row(std::size_t row) const { return row_owner_[row]; }

 private:
  std::vector<std::string> ids_;
  std::vector<std::vector<std::size_t>> rows_;
  std::vector<Attrs> attrs_;
  std::vector<std::size_t> row_owner_;
  std::size_t image_count_ = 0;
};

FeatureTable load_features(const std::filesystem::path& path, FeatureFormat format);
inline FeatureTable load_features(const std::filesystem::path& path) {
  return load_features(path, format_from_path(path));
}

void save_features(const FeatureTable& table, const std::filesystem::path& path, FeatureFormat format);
inline void save_features(const FeatureTable& table, const std::filesystem::path& path) {
  save_features(table, path, format_from_path(path));
}

// Binary tables keep their IDs next to the payload in "<path>.ids".
std::filesystem::path ids_sidecar_path(const std::filesystem::path& feature_path);

// Reads an `identity<TAB>image[<TAB>key=value...]` manifest. With no path,
// every image becomes its own identity.
IdentityIndex load_identities(const std::optional<std::filesystem::path>& path, const FeatureTable& table);
IdentityIndex parse_identities(const std::string& text, const FeatureTable& table);

void save_identities(const IdentityIndex& index, const FeatureTable& table, const std::filesystem::path& path);

}  // namespace fidsearch
