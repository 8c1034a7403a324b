#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "spherereg/geometry.hpp"

namespace spherereg {

enum class CloudFormat { PlyAscii, PlyBinaryLE, XyzText };

CloudFormat parse_cloud_format(const std::string& name);
std::string to_string(CloudFormat format);
/// Guess from the extension; PLY files are sniffed from the header.
CloudFormat detect_cloud_format(const std::filesystem::path& path);

struct LoadReport {
  std::vector<std::string> warnings;  // skipped properties, etc.
};

/// Reads x/y/z (float32 or float64) from PLY or plain "x y z" text. Other
/// vertex properties and other elements are skipped.
PointCloud load_point_cloud(const std::filesystem::path& path, CloudFormat format,
                            LoadReport* report = nullptr);
PointCloud load_point_cloud(const std::filesystem::path& path);

/// Writes float64 coordinates. Rejects non-finite values.
void save_point_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format);

/// Parses PLY/text from memory; `format` as above.
PointCloud parse_point_cloud(const std::string& bytes, CloudFormat format, LoadReport* report = nullptr);

/// 16 whitespace-separated numbers, row-major 4x4 homogeneous matrix.
RigidTransformd load_transform(const std::filesystem::path& path);
void save_transform(const RigidTransformd& t, const std::filesystem::path& path);
std::string format_transform(const RigidTransformd& t);

/// Keypoints with one descriptor per column.
struct DescriptorSet {
  Points keypoints = Points(3, 0);
  Eigen::MatrixXd descriptors;          // dim x count
  std::vector<std::uint8_t> flags;      // 1 = fallback frame used
  std::uint64_t weights_hash = 0;

  Eigen::Index size() const { return keypoints.cols(); }
  Eigen::Index dim() const { return descriptors.rows(); }
};

/// Binary layout: "SDSC", u32 version, u64 count, u32 dim, u64 weights hash,
/// count*3 f64 keypoints, count*dim f64 descriptors, count u8 flags.
void save_descriptors(const DescriptorSet& set, const std::filesystem::path& path);
DescriptorSet load_descriptors(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t v);

}  // namespace spherereg
