#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "spll/lifting.hpp"
#include "spll/rom.hpp"

namespace spll {

/// Artifact on disk is unreadable, truncated or fails its checksum.
class CorruptArtifact : public Error {
 public:
  using Error::Error;
};

/// Dense f64 array of any rank, row-major.
struct ArrayData {
  std::vector<std::uint64_t> dims;
  std::vector<double> values;
};

/// Container layout: "SPLL", u32 version (1), u32 dtype (1 = f64 LE),
/// u32 rank, u64 dims[rank], row-major payload, u32 crc32 of everything before.
void write_array(const std::filesystem::path& path, const ArrayData& a);
ArrayData read_array(const std::filesystem::path& path);

void write_matrix(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix(const std::filesystem::path& path);
void write_vector(const std::filesystem::path& path, const Vector& v);
Vector read_vector(const std::filesystem::path& path);
void write_tensor(const std::filesystem::path& path, const QuadraticTensor& t);
QuadraticTensor read_tensor(const std::filesystem::path& path);

/// Lowercase hex SHA-256 of the file contents.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_string(const std::string& data);

/// Full-precision scientific notation (17 significant digits).
std::string format_double(double v);

/// Writes the file to a sibling temporary and renames it into place.
void write_text_atomic(const std::filesystem::path& path, const std::string& content);

/// One row per (problem, method, r).
std::string summary_csv(const std::vector<DiagnosticsReport>& reports);
/// Long format: problem, method, r, series, t, value.
std::string energy_csv(const std::vector<DiagnosticsReport>& reports);

}  // namespace spll
