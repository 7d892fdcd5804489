#include "spll/io.hpp"

#include <openssl/evp.h>
#include <zlib.h>

#include <array>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace spll {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

namespace {

constexpr std::array<char, 4> kMagic = {'S', 'P', 'L', 'L'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kDtypeF64 = 1;

template <class T>
void put(std::string& buf, T v) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  buf.append(bytes, sizeof(T));
}

template <class T>
T take(const std::string& buf, size_t& pos, const std::filesystem::path& path) {
  if (pos + sizeof(T) > buf.size()) throw CorruptArtifact("truncated container " + path.string());
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptArtifact("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t crc(const char* data, size_t n) {
  uLong c = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large payloads in chunks
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<size_t>(n, 1u << 30));
    c = crc32(c, reinterpret_cast<const Bytef*>(data), chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(c);
}

}  // namespace

void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_array(const std::filesystem::path& path, const ArrayData& a) {
  std::uint64_t count = 1;
  for (auto d : a.dims) count *= d;
  require_dims(count == a.values.size(), "array payload does not match its dimensions");
  std::string buf(kMagic.begin(), kMagic.end());
  put(buf, kVersion);
  put(buf, kDtypeF64);
  put(buf, static_cast<std::uint32_t>(a.dims.size()));
  for (auto d : a.dims) put(buf, d);
  buf.append(reinterpret_cast<const char*>(a.values.data()), a.values.size() * sizeof(double));
  put(buf, crc(buf.data(), buf.size()));
  write_text_atomic(path, buf);
}

ArrayData read_array(const std::filesystem::path& path) {
  const std::string buf = slurp(path);
  if (buf.size() < 20 || !std::equal(kMagic.begin(), kMagic.end(), buf.begin())) {
    throw CorruptArtifact(path.string() + " is not an SPLL container");
  }
  size_t pos = 4;
  const auto version = take<std::uint32_t>(buf, pos, path);
  if (version != kVersion) throw CorruptArtifact(path.string() + ": unsupported container version");
  const auto dtype = take<std::uint32_t>(buf, pos, path);
  if (dtype != kDtypeF64) throw CorruptArtifact(path.string() + ": unsupported dtype tag");
  const auto rank = take<std::uint32_t>(buf, pos, path);
  ArrayData a;
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    a.dims.push_back(take<std::uint64_t>(buf, pos, path));
    count *= a.dims.back();
  }
  const size_t payload = static_cast<size_t>(count) * sizeof(double);
  if (pos + payload + 4 != buf.size()) throw CorruptArtifact(path.string() + ": size does not match header");
  a.values.resize(static_cast<size_t>(count));
  std::memcpy(a.values.data(), buf.data() + pos, payload);
  pos += payload;
  const auto stored = take<std::uint32_t>(buf, pos, path);
  if (stored != crc(buf.data(), buf.size() - 4)) throw CorruptArtifact(path.string() + ": checksum mismatch");
  return a;
}

void write_matrix(const std::filesystem::path& path, const Matrix& m) {
  ArrayData a;
  a.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  a.values.resize(static_cast<size_t>(m.size()));
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(a.values.data(), m.rows(),
                                                                                      m.cols()) = m;
  write_array(path, a);
}

Matrix read_matrix(const std::filesystem::path& path) {
  const ArrayData a = read_array(path);
  if (a.dims.size() != 2) throw CorruptArtifact(path.string() + ": expected a rank-2 array");
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      a.values.data(), static_cast<Index>(a.dims[0]), static_cast<Index>(a.dims[1]));
}

void write_vector(const std::filesystem::path& path, const Vector& v) {
  write_array(path, {{static_cast<std::uint64_t>(v.size())}, {v.data(), v.data() + v.size()}});
}

Vector read_vector(const std::filesystem::path& path) {
  const ArrayData a = read_array(path);
  if (a.dims.size() != 1) throw CorruptArtifact(path.string() + ": expected a rank-1 array");
  return Eigen::Map<const Vector>(a.values.data(), static_cast<Index>(a.dims[0]));
}

void write_tensor(const std::filesystem::path& path, const QuadraticTensor& t) {
  write_array(path, {{static_cast<std::uint64_t>(t.out_dim()), static_cast<std::uint64_t>(t.left_dim()),
                      static_cast<std::uint64_t>(t.right_dim())},
                     t.data()});
}

QuadraticTensor read_tensor(const std::filesystem::path& path) {
  ArrayData a = read_array(path);
  if (a.dims.size() != 3) throw CorruptArtifact(path.string() + ": expected a rank-3 array");
  QuadraticTensor t(static_cast<Index>(a.dims[0]), static_cast<Index>(a.dims[1]), static_cast<Index>(a.dims[2]));
  t.data() = std::move(a.values);
  return t;
}

namespace {

std::string sha256_bytes(const char* data, size_t n) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(data, n, md.data(), &len, EVP_sha256(), nullptr) != 1) throw Error("SHA-256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xF]);
  }
  return out;
}

}  // namespace

std::string sha256_file(const std::filesystem::path& path) {
  const std::string buf = slurp(path);
  return sha256_bytes(buf.data(), buf.size());
}

std::string sha256_string(const std::string& data) { return sha256_bytes(data.data(), data.size()); }

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

std::string summary_csv(const std::vector<DiagnosticsReport>& reports) {
  std::ostringstream os;
  os << "problem,method,r,dim_label,field,train_error,test_error,max_energy_error_train,max_energy_error,"
        "wall_seconds,efficacy\n";
  for (const auto& rep : reports) {
    for (const auto& [field, train] : rep.train_error) {
      auto it = rep.test_error.find(field);
      const double test = it == rep.test_error.end() ? std::nan("") : it->second;
      const Index label = rep.problem == Problem::KGZ2D ? 7 * rep.r : 2 * rep.r;
      os << to_string(rep.problem) << ',' << to_string(rep.method) << ',' << rep.r << ',' << label << ','
         << field << ',' << format_double(train) << ',' << format_double(test) << ','
         << format_double(rep.max_energy_error_train) << ',' << format_double(rep.max_energy_error) << ','
         << format_double(rep.wall_seconds) << ',' << format_double(rep.efficacy) << '\n';
    }
  }
  return os.str();
}

std::string energy_csv(const std::vector<DiagnosticsReport>& reports) {
  std::ostringstream os;
  os << "problem,method,r,series,t,value\n";
  for (const auto& rep : reports) {
    auto emit = [&](const char* label, const Vector& v) {
      for (Index k = 0; k < v.size() && k < rep.times.size(); ++k) {
        os << to_string(rep.problem) << ',' << to_string(rep.method) << ',' << rep.r << ',' << label << ','
           << format_double(rep.times[k]) << ',' << format_double(v[k]) << '\n';
      }
    };
    emit("fom_energy_error", rep.energy_error);
    emit("lifted_energy_drift", rep.lifted_energy_drift);
  }
  return os.str();
}

}  // namespace spll
