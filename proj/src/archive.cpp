#include "vitppg/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace vitppg {

static_assert(std::endian::native == std::endian::little, "archive format assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'V', 'P', 'N', 'A'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw DataError("archive: truncated input");
  return v;
}

template <typename T>
void write_block(std::ostream& os, const std::vector<T>& v) {
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
std::vector<T> read_block(std::istream& is, std::uint64_t count) {
  std::vector<T> v(count);
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * sizeof(T)));
  if (!is) throw DataError("archive: truncated payload");
  return v;
}

}  // namespace

DType NamedArray::dtype() const { return static_cast<DType>(data.index() + 1); }

std::uint64_t NamedArray::element_count() const {
  std::uint64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

void ArrayArchive::put(NamedArray array) {
  const auto it = index_.find(array.name);
  if (it != index_.end()) {
    arrays_[it->second] = std::move(array);
    return;
  }
  index_[array.name] = arrays_.size();
  arrays_.push_back(std::move(array));
}

void ArrayArchive::put(const std::string& name, const Matrix& m) {
  const RowMatrix rm = m;
  put(NamedArray{name,
                 {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())},
                 std::vector<double>(rm.data(), rm.data() + rm.size())});
}

void ArrayArchive::put(const std::string& name, const Vector& v) {
  put(NamedArray{name, {static_cast<std::uint64_t>(v.size())}, std::vector<double>(v.data(), v.data() + v.size())});
}

void ArrayArchive::put(const std::string& name, const MaskGrid& m) {
  const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  put(NamedArray{name,
                 {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())},
                 std::vector<std::uint8_t>(rm.data(), rm.data() + rm.size())});
}

const NamedArray& ArrayArchive::get(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw DataError("archive: missing array '" + name + "'");
  return arrays_[it->second];
}

Matrix ArrayArchive::get_matrix(const std::string& name) const {
  const NamedArray& a = get(name);
  if (a.dtype() != DType::f64 || a.shape.size() != 2) throw DataError("archive: '" + name + "' is not a f64 matrix");
  const auto& v = std::get<std::vector<double>>(a.data);
  return Eigen::Map<const RowMatrix>(v.data(), static_cast<Eigen::Index>(a.shape[0]),
                                     static_cast<Eigen::Index>(a.shape[1]));
}

Vector ArrayArchive::get_vector(const std::string& name) const {
  const NamedArray& a = get(name);
  if (a.dtype() != DType::f64 || a.shape.size() != 1) throw DataError("archive: '" + name + "' is not a f64 vector");
  const auto& v = std::get<std::vector<double>>(a.data);
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

MaskGrid ArrayArchive::get_mask(const std::string& name) const {
  const NamedArray& a = get(name);
  if (a.dtype() != DType::u8 || a.shape.size() != 2) throw DataError("archive: '" + name + "' is not a u8 grid");
  const auto& v = std::get<std::vector<std::uint8_t>>(a.data);
  return Eigen::Map<const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      v.data(), static_cast<Eigen::Index>(a.shape[0]), static_cast<Eigen::Index>(a.shape[1]));
}

void ArrayArchive::write(std::ostream& os) const {
  os.write(kMagic, 4);
  write_pod(os, kVersion);
  const std::string m = manifest.dump();
  write_pod(os, static_cast<std::uint64_t>(m.size()));
  os.write(m.data(), static_cast<std::streamsize>(m.size()));
  write_pod(os, static_cast<std::uint64_t>(arrays_.size()));
  for (const auto& a : arrays_) {
    write_pod(os, static_cast<std::uint32_t>(a.name.size()));
    os.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
    write_pod(os, static_cast<std::uint8_t>(a.dtype()));
    write_pod(os, static_cast<std::uint32_t>(a.shape.size()));
    for (auto d : a.shape) write_pod(os, d);
    std::visit([&os](const auto& v) { write_block(os, v); }, a.data);
  }
}

ArrayArchive ArrayArchive::read(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) throw DataError("archive: bad magic");
  if (read_pod<std::uint32_t>(is) != kVersion) throw DataError("archive: unsupported version");
  ArrayArchive ar;
  const auto mlen = read_pod<std::uint64_t>(is);
  std::string m(mlen, '\0');
  is.read(m.data(), static_cast<std::streamsize>(mlen));
  if (!is) throw DataError("archive: truncated manifest");
  try {
    ar.manifest = nlohmann::json::parse(m);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("archive: bad manifest: ") + e.what());
  }
  const auto count = read_pod<std::uint64_t>(is);
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedArray a;
    const auto nlen = read_pod<std::uint32_t>(is);
    a.name.resize(nlen);
    is.read(a.name.data(), nlen);
    const auto dtype = static_cast<DType>(read_pod<std::uint8_t>(is));
    const auto ndim = read_pod<std::uint32_t>(is);
    for (std::uint32_t k = 0; k < ndim; ++k) a.shape.push_back(read_pod<std::uint64_t>(is));
    const auto n = a.element_count();
    switch (dtype) {
      case DType::f64: a.data = read_block<double>(is, n); break;
      case DType::u8: a.data = read_block<std::uint8_t>(is, n); break;
      case DType::i64: a.data = read_block<std::int64_t>(is, n); break;
      default: throw DataError("archive: unknown dtype for '" + a.name + "'");
    }
    ar.put(std::move(a));
  }
  return ar;
}

void ArrayArchive::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open '" + path + "' for writing");
  write(os);
  if (!os) throw DataError("failed writing '" + path + "'");
}

ArrayArchive ArrayArchive::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open '" + path + "'");
  return read(is);
}

}  // namespace vitppg
