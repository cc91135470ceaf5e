#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "vitppg/common.hpp"

namespace vitppg {

// Container of named numeric arrays plus a JSON manifest.
//
// Binary layout (little-endian):
//   "VPNA"  u32 version
//   u64 manifest_bytes, manifest (UTF-8 JSON)
//   u64 array_count
//   per array: u32 name_bytes, name, u8 dtype (1 = f64, 2 = u8, 3 = i64),
//              u32 ndim, u64 dims[ndim], row-major payload
enum class DType : std::uint8_t { f64 = 1, u8 = 2, i64 = 3 };

struct NamedArray {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::variant<std::vector<double>, std::vector<std::uint8_t>, std::vector<std::int64_t>> data;

  DType dtype() const;
  std::uint64_t element_count() const;
};

class ArrayArchive {
 public:
  nlohmann::json manifest = nlohmann::json::object();

  // put replaces an existing array of the same name.
  void put(const std::string& name, const Matrix& m);
  void put(const std::string& name, const Vector& v);
  void put(const std::string& name, const MaskGrid& m);
  void put(NamedArray array);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const NamedArray& get(const std::string& name) const;
  const std::vector<NamedArray>& arrays() const { return arrays_; }

  // Shape-checked readers; a Vector target accepts 1-d arrays only.
  Matrix get_matrix(const std::string& name) const;
  Vector get_vector(const std::string& name) const;
  MaskGrid get_mask(const std::string& name) const;

  void write(std::ostream& os) const;
  static ArrayArchive read(std::istream& is);
  void save(const std::string& path) const;
  static ArrayArchive load(const std::string& path);

 private:
  std::vector<NamedArray> arrays_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace vitppg
