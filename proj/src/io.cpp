#include "spherereg/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace spherereg {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

CloudFormat parse_cloud_format(const std::string& name) {
  if (name == "ply-ascii") return CloudFormat::PlyAscii;
  if (name == "ply-binary-le" || name == "ply") return CloudFormat::PlyBinaryLE;
  if (name == "xyz-text" || name == "xyz") return CloudFormat::XyzText;
  throw ConfigError("unknown point cloud format '" + name + "'");
}

std::string to_string(CloudFormat format) {
  switch (format) {
    case CloudFormat::PlyAscii: return "ply-ascii";
    case CloudFormat::PlyBinaryLE: return "ply-binary-le";
    case CloudFormat::XyzText: return "xyz-text";
  }
  return "?";
}

CloudFormat detect_cloud_format(const std::filesystem::path& path) {
  if (path.extension() != ".ply") return CloudFormat::XyzText;
  std::ifstream in(path, std::ios::binary);
  std::string line;
  while (in && std::getline(in, line)) {
    if (line.rfind("format ascii", 0) == 0) return CloudFormat::PlyAscii;
    if (line.rfind("format binary_little_endian", 0) == 0) return CloudFormat::PlyBinaryLE;
    if (line.rfind("end_header", 0) == 0) break;
  }
  return CloudFormat::PlyBinaryLE;
}

namespace {

enum class ScalarType { I8, U8, I16, U16, I32, U32, F32, F64 };

std::size_t type_size(ScalarType t) {
  switch (t) {
    case ScalarType::I8:
    case ScalarType::U8: return 1;
    case ScalarType::I16:
    case ScalarType::U16: return 2;
    case ScalarType::I32:
    case ScalarType::U32:
    case ScalarType::F32: return 4;
    case ScalarType::F64: return 8;
  }
  return 0;
}

bool parse_type(const std::string& s, ScalarType& t) {
  static const std::pair<const char*, ScalarType> table[] = {
      {"char", ScalarType::I8},     {"int8", ScalarType::I8},      {"uchar", ScalarType::U8},
      {"uint8", ScalarType::U8},    {"short", ScalarType::I16},    {"int16", ScalarType::I16},
      {"ushort", ScalarType::U16},  {"uint16", ScalarType::U16},   {"int", ScalarType::I32},
      {"int32", ScalarType::I32},   {"uint", ScalarType::U32},     {"uint32", ScalarType::U32},
      {"float", ScalarType::F32},   {"float32", ScalarType::F32},  {"double", ScalarType::F64},
      {"float64", ScalarType::F64}};
  for (const auto& [name, type] : table)
    if (s == name) {
      t = type;
      return true;
    }
  return false;
}

double read_binary(const char* p, ScalarType t) {
  switch (t) {
    case ScalarType::I8: { std::int8_t v; std::memcpy(&v, p, 1); return v; }
    case ScalarType::U8: { std::uint8_t v; std::memcpy(&v, p, 1); return v; }
    case ScalarType::I16: { std::int16_t v; std::memcpy(&v, p, 2); return v; }
    case ScalarType::U16: { std::uint16_t v; std::memcpy(&v, p, 2); return v; }
    case ScalarType::I32: { std::int32_t v; std::memcpy(&v, p, 4); return v; }
    case ScalarType::U32: { std::uint32_t v; std::memcpy(&v, p, 4); return v; }
    case ScalarType::F32: { float v; std::memcpy(&v, p, 4); return v; }
    case ScalarType::F64: { double v; std::memcpy(&v, p, 8); return v; }
  }
  return 0.0;
}

struct Property {
  std::string name;
  ScalarType type = ScalarType::F32;
  bool is_list = false;
  ScalarType count_type = ScalarType::U8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;
};

struct Header {
  bool binary = false;
  std::vector<Element> elements;
  std::size_t data_offset = 0;
};

Header parse_header(const std::string& bytes) {
  Header h;
  std::size_t pos = 0;
  auto next_line = [&](std::string& line) {
    if (pos >= bytes.size()) throw ParseError("PLY header ended before end_header", pos);
    std::size_t end = bytes.find('\n', pos);
    if (end == std::string::npos) throw ParseError("PLY header ended before end_header", bytes.size());
    line = bytes.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::size_t start = pos;
    pos = end + 1;
    return start;
  };
  std::string line;
  next_line(line);
  if (line != "ply") throw ParseError("missing 'ply' magic", 0);
  bool have_format = false;
  while (true) {
    const std::size_t at = next_line(line);
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word.empty() || word == "comment" || word == "obj_info") continue;
    if (word == "end_header") break;
    if (word == "format") {
      std::string fmt, version;
      ls >> fmt >> version;
      if (fmt == "ascii") h.binary = false;
      else if (fmt == "binary_little_endian") h.binary = true;
      else throw ParseError("unsupported PLY format '" + fmt + "'", at);
      have_format = true;
    } else if (word == "element") {
      Element e;
      long long count = -1;
      ls >> e.name >> count;
      if (!ls || count < 0) throw ParseError("malformed element line", at);
      e.count = static_cast<std::size_t>(count);
      h.elements.push_back(std::move(e));
    } else if (word == "property") {
      if (h.elements.empty()) throw ParseError("property before any element", at);
      Property p;
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string ct, it;
        ls >> ct >> it >> p.name;
        p.is_list = true;
        if (!parse_type(ct, p.count_type) || !parse_type(it, p.type))
          throw ParseError("unknown list property type", at);
      } else {
        ls >> p.name;
        if (!parse_type(type, p.type)) throw ParseError("unknown property type '" + type + "'", at);
      }
      if (!ls) throw ParseError("malformed property line", at);
      h.elements.back().properties.push_back(std::move(p));
    } else {
      throw ParseError("unexpected PLY header keyword '" + word + "'", at);
    }
  }
  if (!have_format) throw ParseError("PLY header lacks a format line", 0);
  h.data_offset = pos;
  return h;
}

// Sequential whitespace token reader over the ascii payload.
class TokenReader {
 public:
  TokenReader(const std::string& bytes, std::size_t pos) : bytes_(bytes), pos_(pos) {}

  double next() {
    while (pos_ < bytes_.size() && std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
    if (pos_ >= bytes_.size()) throw ParseError("truncated ascii payload", pos_);
    const char* first = bytes_.data() + pos_;
    const char* last = bytes_.data() + bytes_.size();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() ||
        (ptr != last && !std::isspace(static_cast<unsigned char>(*ptr))))
      throw ParseError("malformed number", pos_);
    pos_ = static_cast<std::size_t>(ptr - bytes_.data());
    return v;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::string& bytes_;
  std::size_t pos_;
};

PointCloud parse_ply(const std::string& bytes, CloudFormat expected, LoadReport* report) {
  Header h = parse_header(bytes);
  if (expected == CloudFormat::PlyAscii && h.binary)
    throw ParseError("expected ascii PLY, found binary_little_endian", 0);
  if (expected == CloudFormat::PlyBinaryLE && !h.binary)
    throw ParseError("expected binary_little_endian PLY, found ascii", 0);

  PointCloud cloud;
  std::size_t pos = h.data_offset;
  TokenReader tokens(bytes, pos);
  for (const Element& e : h.elements) {
    const bool is_vertex = e.name == "vertex";
    int slot[3] = {-1, -1, -1};
    if (is_vertex) {
      for (std::size_t k = 0; k < e.properties.size(); ++k) {
        const Property& p = e.properties[k];
        const int axis = p.name == "x" ? 0 : p.name == "y" ? 1 : p.name == "z" ? 2 : -1;
        if (axis >= 0 && !p.is_list) {
          if (p.type != ScalarType::F32 && p.type != ScalarType::F64)
            throw ParseError("vertex property '" + p.name + "' must be float32 or float64", 0);
          slot[axis] = static_cast<int>(k);
        } else if (report) {
          report->warnings.push_back("skipping vertex property '" + p.name + "'");
        }
      }
      if (slot[0] < 0 || slot[1] < 0 || slot[2] < 0)
        throw ParseError("vertex element lacks x/y/z properties", 0);
      cloud.points.resize(3, static_cast<Eigen::Index>(e.count));
    } else if (report) {
      report->warnings.push_back("skipping element '" + e.name + "'");
    }

    for (std::size_t i = 0; i < e.count; ++i) {
      for (std::size_t k = 0; k < e.properties.size(); ++k) {
        const Property& p = e.properties[k];
        if (h.binary) {
          if (p.is_list) {
            const std::size_t cs = type_size(p.count_type);
            if (pos + cs > bytes.size()) throw ParseError("truncated binary payload", pos);
            const double n = read_binary(bytes.data() + pos, p.count_type);
            pos += cs;
            if (n < 0) throw ParseError("negative list length", pos - cs);
            const std::size_t skip = static_cast<std::size_t>(n) * type_size(p.type);
            if (pos + skip > bytes.size()) throw ParseError("truncated binary payload", pos);
            pos += skip;
            continue;
          }
          const std::size_t sz = type_size(p.type);
          if (pos + sz > bytes.size()) throw ParseError("truncated binary payload", pos);
          if (is_vertex) {
            for (int a = 0; a < 3; ++a)
              if (slot[a] == static_cast<int>(k))
                cloud.points(a, static_cast<Eigen::Index>(i)) = read_binary(bytes.data() + pos, p.type);
          }
          pos += sz;
        } else {
          if (p.is_list) {
            const double n = tokens.next();
            for (long long j = 0; j < static_cast<long long>(n); ++j) tokens.next();
            continue;
          }
          const std::size_t at = tokens.pos();
          const double v = tokens.next();
          if (is_vertex) {
            for (int a = 0; a < 3; ++a)
              if (slot[a] == static_cast<int>(k)) {
                if (!std::isfinite(v)) throw ParseError("non-finite coordinate", at);
                cloud.points(a, static_cast<Eigen::Index>(i)) =
                    p.type == ScalarType::F32 ? static_cast<double>(static_cast<float>(v)) : v;
              }
          }
        }
      }
      if (is_vertex && !cloud.points.col(static_cast<Eigen::Index>(i)).allFinite())
        throw ParseError("non-finite coordinate in vertex " + std::to_string(i), h.binary ? pos : tokens.pos());
    }
    if (is_vertex) break;
  }
  return cloud;
}

PointCloud parse_xyz(const std::string& bytes) {
  std::vector<double> values;
  std::size_t pos = 0;
  while (true) {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (pos >= bytes.size()) break;
    // Skip comment lines.
    if (bytes[pos] == '#') {
      pos = bytes.find('\n', pos);
      if (pos == std::string::npos) break;
      continue;
    }
    TokenReader line_tokens(bytes, pos);
    const double v = line_tokens.next();
    if (!std::isfinite(v)) throw ParseError("non-finite coordinate", pos);
    values.push_back(v);
    pos = line_tokens.pos();
  }
  if (values.size() % 3 != 0) throw ParseError("xyz text holds a partial point", bytes.size());
  PointCloud cloud;
  cloud.points = Eigen::Map<const Points>(values.data(), 3, static_cast<Eigen::Index>(values.size() / 3));
  return cloud;
}

void append_raw(std::string& out, const void* p, std::size_t n) {
  out.append(static_cast<const char*>(p), n);
}

}  // namespace

PointCloud parse_point_cloud(const std::string& bytes, CloudFormat format, LoadReport* report) {
  if (format == CloudFormat::XyzText) return parse_xyz(bytes);
  return parse_ply(bytes, format, report);
}

PointCloud load_point_cloud(const std::filesystem::path& path, CloudFormat format, LoadReport* report) {
  return parse_point_cloud(read_file(path), format, report);
}

PointCloud load_point_cloud(const std::filesystem::path& path) {
  return load_point_cloud(path, detect_cloud_format(path));
}

void save_point_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format) {
  if (!cloud.points.allFinite()) throw ConfigError("refusing to save a cloud with non-finite coordinates");
  std::string out;
  char buf[96];
  if (format == CloudFormat::XyzText) {
    for (Eigen::Index i = 0; i < cloud.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", cloud.points(0, i), cloud.points(1, i),
                    cloud.points(2, i));
      out += buf;
    }
  } else {
    out = "ply\nformat ";
    out += format == CloudFormat::PlyAscii ? "ascii" : "binary_little_endian";
    out += " 1.0\nelement vertex " + std::to_string(cloud.size()) +
           "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
    for (Eigen::Index i = 0; i < cloud.size(); ++i) {
      if (format == CloudFormat::PlyAscii) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", cloud.points(0, i), cloud.points(1, i),
                      cloud.points(2, i));
        out += buf;
      } else {
        append_raw(out, cloud.points.col(i).data(), 3 * sizeof(double));
      }
    }
  }
  write_file(path, out);
}

RigidTransformd load_transform(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  TokenReader tokens(text, 0);
  Mat4 m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = tokens.next();
  return transform_from_matrix(m);
}

std::string format_transform(const RigidTransformd& t) {
  const Mat4 m = t.matrix();
  std::string out;
  char buf[32];
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
      out += buf;
      out += c == 3 ? '\n' : ' ';
    }
  }
  return out;
}

void save_transform(const RigidTransformd& t, const std::filesystem::path& path) {
  write_file(path, format_transform(t));
}

void save_descriptors(const DescriptorSet& set, const std::filesystem::path& path) {
  if (set.descriptors.cols() != set.size()) throw ConfigError("descriptor/keypoint count mismatch");
  std::string out = "SDSC";
  const std::uint32_t version = 1;
  const std::uint64_t count = static_cast<std::uint64_t>(set.size());
  const std::uint32_t dim = static_cast<std::uint32_t>(set.dim());
  append_raw(out, &version, 4);
  append_raw(out, &count, 8);
  append_raw(out, &dim, 4);
  append_raw(out, &set.weights_hash, 8);
  append_raw(out, set.keypoints.data(), count * 3 * sizeof(double));
  const Eigen::MatrixXd d = set.descriptors;  // contiguous column-major
  append_raw(out, d.data(), count * dim * sizeof(double));
  std::vector<std::uint8_t> flags = set.flags;
  flags.resize(count, 0);
  append_raw(out, flags.data(), count);
  write_file(path, out);
}

DescriptorSet load_descriptors(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  std::size_t pos = 0;
  auto take = [&](void* dst, std::size_t n) {
    if (pos + n > bytes.size()) throw ParseError("truncated descriptor file", pos);
    std::memcpy(dst, bytes.data() + pos, n);
    pos += n;
  };
  char magic[4];
  take(magic, 4);
  if (std::memcmp(magic, "SDSC", 4) != 0) throw ParseError("bad descriptor file magic", 0);
  std::uint32_t version = 0, dim = 0;
  std::uint64_t count = 0;
  take(&version, 4);
  if (version != 1) throw ParseError("unsupported descriptor file version", 4);
  take(&count, 8);
  take(&dim, 4);
  DescriptorSet set;
  take(&set.weights_hash, 8);
  if (count > bytes.size() || dim > bytes.size()) throw ParseError("implausible descriptor header", 8);
  set.keypoints.resize(3, static_cast<Eigen::Index>(count));
  take(set.keypoints.data(), count * 3 * sizeof(double));
  set.descriptors.resize(dim, static_cast<Eigen::Index>(count));
  take(set.descriptors.data(), count * dim * sizeof(double));
  set.flags.resize(count);
  take(set.flags.data(), count);
  if (pos != bytes.size()) throw ParseError("trailing bytes in descriptor file", pos);
  return set;
}

}  // namespace spherereg
