#include "fidsearch/features_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "fidsearch/errors.hpp"

namespace fidsearch {
namespace {

constexpr std::array<char, 4> kMagic = {'F', 'S', 'F', '1'};

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
  return v;
}

std::uint32_t read_u32_le(const char* p) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  return to_le(v);
}

void append_u32_le(std::string& out, std::uint32_t v) {
  v = to_le(v);
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.append(buf, 4);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open '" + path.string() + "' for reading");
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw_io("read failed for '" + path.string() + "'");
  return content;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_io("cannot open '" + path.string() + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out) throw_io("write failed for '" + path.string() + "'");
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = end + 1;
  }
  return lines;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t end = line.find(sep, start);
    if (end == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, end - start));
    start = end + 1;
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::string format_float(float v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

FeatureTable load_binary(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 12 || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw_validation("'" + path.string() + "': bad magic, expected FSF1 header");
  }
  const std::uint64_t n = read_u32_le(bytes.data() + 4);
  const std::uint64_t d = read_u32_le(bytes.data() + 8);
  if (n == 0 || d == 0) {
    throw_validation("'" + path.string() + "': header declares an empty table (n=" + std::to_string(n) +
                     ", d=" + std::to_string(d) + ")");
  }
  const std::uint64_t payload = bytes.size() - 12;
  if (payload != n * d * 4) {
    throw_validation("'" + path.string() + "': header says " + std::to_string(n) + "x" + std::to_string(d) +
                     " floats (" + std::to_string(n * d * 4) + " bytes) but payload has " +
                     std::to_string(payload) + " bytes");
  }
  std::vector<float> data(n * d);
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::uint32_t raw = read_u32_le(bytes.data() + 12 + 4 * i);
    data[i] = std::bit_cast<float>(raw);
  }
  const auto sidecar = ids_sidecar_path(path);
  std::vector<std::string> ids = split_lines(read_file(sidecar));
  if (ids.size() != n) {
    throw_validation("'" + sidecar.string() + "': expected " + std::to_string(n) + " IDs, found " +
                     std::to_string(ids.size()));
  }
  return FeatureTable(std::move(ids), std::move(data), d);
}

FeatureTable load_csv(const std::filesystem::path& path) {
  const auto lines = split_lines(read_file(path));
  if (lines.empty()) throw_validation("'" + path.string() + "': missing CSV header");
  const auto header = split(lines[0], ',');
  if (header.size() < 2 || trim(header[0]) != "id") {
    throw_validation("'" + path.string() + "': CSV header must start with 'id' and name at least one column");
  }
  const std::size_t d = header.size() - 1;
  std::vector<std::string> ids;
  std::vector<float> data;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (trim(lines[li]).empty()) continue;
    const auto cells = split(lines[li], ',');
    const std::size_t row = ids.size();
    if (cells.size() != d + 1) {
      throw_validation("'" + path.string() + "': row " + std::to_string(row) + " has " +
                       std::to_string(cells.size() - 1) + " values, header declares " + std::to_string(d));
    }
    ids.push_back(trim(cells[0]));
    for (std::size_t c = 1; c <= d; ++c) {
      const std::string cell = trim(cells[c]);
      float v = 0.0f;
      const char* first = cell.data();
      const char* last = first + cell.size();
      if (first != last && *first == '+') ++first;
      auto res = std::from_chars(first, last, v);
      if (res.ec != std::errc() || res.ptr != last) {
        throw_validation("'" + path.string() + "': unparsable value '" + cell + "' at row " + std::to_string(row) +
                         ", column " + std::to_string(c - 1));
      }
      if (!std::isfinite(v)) {
        throw_validation("'" + path.string() + "': non-finite value at row " + std::to_string(row) + ", column " +
                         std::to_string(c - 1));
      }
      data.push_back(v);
    }
  }
  if (ids.empty()) throw_validation("'" + path.string() + "': CSV has no data rows");
  return FeatureTable(std::move(ids), std::move(data), d);
}

}  // namespace

FeatureFormat format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".csv" ? FeatureFormat::Csv : FeatureFormat::Binary;
}

std::filesystem::path ids_sidecar_path(const std::filesystem::path& feature_path) {
  auto p = feature_path;
  p += ".ids";
  return p;
}

FeatureTable::FeatureTable(std::vector<std::string> ids, std::vector<float> data, std::size_t dim)
    : ids_(std::move(ids)), data_(std::move(data)), dim_(dim) {
  if (ids_.empty() || dim_ == 0) throw_validation("feature table must have at least one row and one column");
  if (data_.size() != ids_.size() * dim_) {
    throw_validation("feature table has " + std::to_string(data_.size()) + " values, expected " +
                     std::to_string(ids_.size()) + "x" + std::to_string(dim_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw_validation("non-finite value at row " + std::to_string(i / dim_) + " (id '" + ids_[i / dim_] +
                       "'), column " + std::to_string(i % dim_));
    }
  }
  lookup_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (ids_[i].empty()) throw_validation("empty image ID at row " + std::to_string(i));
    if (ids_[i].find_first_of("\t\n\r") != std::string::npos) {
      throw_validation("image ID at row " + std::to_string(i) + " contains a tab or newline");
    }
    if (!lookup_.emplace(ids_[i], i).second) throw_validation("duplicate image ID '" + ids_[i] + "'");
  }
}

std::optional<std::size_t> FeatureTable::find(const std::string& id) const {
  auto it = lookup_.find(id);
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

FeatureTable FeatureTable::subset(std::span<const std::size_t> rows) const {
  std::vector<std::string> ids;
  std::vector<float> data;
  ids.reserve(rows.size());
  data.reserve(rows.size() * dim_);
  for (std::size_t r : rows) {
    if (r >= ids_.size()) throw_validation("row index out of range in subset");
    ids.push_back(ids_[r]);
    auto src = row(r);
    data.insert(data.end(), src.begin(), src.end());
  }
  return FeatureTable(std::move(ids), std::move(data), dim_);
}

FeatureTable load_features(const std::filesystem::path& path, FeatureFormat format) {
  return format == FeatureFormat::Csv ? load_csv(path) : load_binary(path);
}

void save_features(const FeatureTable& table, const std::filesystem::path& path, FeatureFormat format) {
  if (format == FeatureFormat::Csv) {
    std::string out = "id";
    for (std::size_t c = 0; c < table.dim(); ++c) out += ",f" + std::to_string(c);
    out += '\n';
    for (std::size_t r = 0; r < table.rows(); ++r) {
      out += table.ids()[r];
      for (float v : table.row(r)) {
        out += ',';
        out += format_float(v);
      }
      out += '\n';
    }
    write_file(path, out);
    return;
  }
  std::string out;
  out.reserve(12 + table.data().size() * 4);
  out.append(kMagic.data(), kMagic.size());
  append_u32_le(out, static_cast<std::uint32_t>(table.rows()));
  append_u32_le(out, static_cast<std::uint32_t>(table.dim()));
  for (float v : table.data()) {
    std::uint32_t raw = to_le(std::bit_cast<std::uint32_t>(v));
    char buf[4];
    std::memcpy(buf, &raw, 4);
    out.append(buf, 4);
  }
  write_file(path, out);
  std::string ids;
  for (const auto& id : table.ids()) {
    ids += id;
    ids += '\n';
  }
  write_file(ids_sidecar_path(path), ids);
}

IdentityIndex::IdentityIndex(const FeatureTable& table,
                             const std::map<std::string, std::vector<std::string>>& identities,
                             std::map<std::string, Attrs> attrs) {
  constexpr std::size_t kUnowned = static_cast<std::size_t>(-1);
  row_owner_.assign(table.rows(), kUnowned);
  for (const auto& [identity, images] : identities) {
    if (identity.empty()) throw_validation("empty identity ID");
    if (images.empty()) throw_validation("identity '" + identity + "' has no images");
    const std::size_t slot = ids_.size();
    std::vector<std::size_t> rows;
    rows.reserve(images.size());
    for (const auto& image : images) {
      auto r = table.find(image);
      if (!r) throw_validation("identity '" + identity + "' references unknown image ID '" + image + "'");
      if (row_owner_[*r] != kUnowned) {
        const std::string& other = row_owner_[*r] == slot ? identity : ids_[row_owner_[*r]];
        throw_validation("image ID '" + image + "' is claimed by identities '" + other + "' and '" + identity + "'");
      }
      row_owner_[*r] = slot;
      rows.push_back(*r);
    }
    ids_.push_back(identity);
    rows_.push_back(std::move(rows));
    auto a = attrs.find(identity);
    attrs_.push_back(a == attrs.end() ? Attrs{} : std::move(a->second));
    image_count_ += images.size();
  }
  for (const auto& [identity, unused] : attrs) {
    (void)unused;
    if (!identities.count(identity)) throw_validation("attributes given for unknown identity '" + identity + "'");
  }
  for (std::size_t r = 0; r < row_owner_.size(); ++r) {
    if (row_owner_[r] == kUnowned) {
      throw_validation("image ID '" + table.ids()[r] + "' does not belong to any identity");
    }
  }
}

IdentityIndex IdentityIndex::singletons(const FeatureTable& table) {
  std::map<std::string, std::vector<std::string>> identities;
  for (const auto& id : table.ids()) identities[id].push_back(id);
  return IdentityIndex(table, identities);
}

std::optional<std::size_t> IdentityIndex::find(const std::string& identity) const {
  auto it = std::lower_bound(ids_.begin(), ids_.end(), identity);
  if (it == ids_.end() || *it != identity) return std::nullopt;
  return static_cast<std::size_t>(it - ids_.begin());
}

IdentityIndex parse_identities(const std::string& text, const FeatureTable& table) {
  std::map<std::string, std::vector<std::string>> identities;
  std::map<std::string, IdentityIndex::Attrs> attrs;
  std::set<std::string> seen_images;
  const auto lines = split_lines(text);
  for (std::size_t li = 0; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    const auto fields = split(lines[li], '\t');
    const std::string where = "identity manifest line " + std::to_string(li + 1);
    if (fields.size() < 2 || fields[0].empty()) throw_validation(where + ": expected identity<TAB>image");
    const std::string& identity = fields[0];
    const std::string& image = fields[1];
    if (image.empty()) throw_validation(where + ": identity '" + identity + "' lists an empty image ID");
    if (!seen_images.insert(image).second) {
      std::string owner;
      for (const auto& [id, imgs] : identities) {
        if (std::find(imgs.begin(), imgs.end(), image) != imgs.end()) owner = id;
      }
      throw_validation(where + ": image ID '" + image + "' is claimed by identities '" + owner + "' and '" +
                       identity + "'");
    }
    identities[identity].push_back(image);
    for (std::size_t f = 2; f < fields.size(); ++f) {
      const auto eq = fields[f].find('=');
      if (eq == std::string::npos || eq == 0) throw_validation(where + ": attribute '" + fields[f] + "' is not key=value");
      const std::string key = fields[f].substr(0, eq);
      const std::string value = fields[f].substr(eq + 1);
      auto [it, inserted] = attrs[identity].emplace(key, value);
      if (!inserted && it->second != value) {
        throw_validation(where + ": conflicting values for attribute '" + key + "' of identity '" + identity + "'");
      }
    }
  }
  return IdentityIndex(table, identities, std::move(attrs));
}

IdentityIndex load_identities(const std::optional<std::filesystem::path>& path, const FeatureTable& table) {
  if (!path) return IdentityIndex::singletons(table);
  return parse_identities(read_file(*path), table);
}

void save_identities(const IdentityIndex& index, const FeatureTable& table, const std::filesystem::path& path) {
  std::string out;
  for (std::size_t i = 0; i < index.size(); ++i) {
    for (std::size_t r : index.rows_of(i)) {
      out += index.identity_ids()[i];
      out += '\t';
      out += table.ids()[r];
      for (const auto& [k, v] : index.attrs_of(i)) {
        out += '\t';
        out += k;
        out += '=';
        out += v;
      }
      out += '\n';
    }
  }
  write_file(path, out);
}

}  // namespace fidsearch
