#include "uff/io.hpp"

#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace uff {

namespace {

constexpr char kCloudMagic[8] = {'U', 'F', 'F', 'P', 'T', 'S', '0', '1'};

[[noreturn]] void parse_fail(const std::filesystem::path& path, const std::string& what) {
  throw std::runtime_error(path.string() + ": " + what);
}

void write_u32le(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff),
                              static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

void write_f32le(std::ostream& out, float f) {
  write_u32le(out, std::bit_cast<std::uint32_t>(f));
}

std::uint32_t read_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

float read_f32le(const unsigned char* p) { return std::bit_cast<float>(read_u32le(p)); }

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) parse_fail(path, "cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

PointCloud parse_binary(const std::filesystem::path& path, const std::string& bytes) {
  if (bytes.size() < 12) parse_fail(path, "truncated header at byte offset 8");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint32_t count = read_u32le(p + 8);
  if (count == 0) parse_fail(path, "zero point count at byte offset 8");
  const std::size_t need = 12 + static_cast<std::size_t>(count) * 12;
  if (bytes.size() != need) {
    parse_fail(path, "expected " + std::to_string(need) + " bytes for " + std::to_string(count) +
                         " points, found " + std::to_string(bytes.size()) +
                         " (at byte offset 12)");
  }

  PointCloud cloud;
  cloud.points.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t off = 12 + static_cast<std::size_t>(i) * 12;
    const Point3 pt{static_cast<double>(read_f32le(p + off)),
                    static_cast<double>(read_f32le(p + off + 4)),
                    static_cast<double>(read_f32le(p + off + 8))};
    if (!pt.finite()) {
      parse_fail(path, "non-finite coordinate at byte offset " + std::to_string(off));
    }
    cloud.points.push_back(pt);
  }
  return cloud;
}

bool parse_point_line(const std::string& line, Point3& out) {
  std::istringstream ss(line);
  if (!(ss >> out.x >> out.y >> out.z)) return false;
  // Anything after the three coordinates (e.g. OFF vertex colors) is ignored.
  return true;
}

PointCloud parse_ascii(const std::filesystem::path& path, const std::string& text) {
  PointCloud cloud;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    Point3 pt;
    if (!parse_point_line(line, pt)) {
      parse_fail(path, "line " + std::to_string(lineno) + ": expected three coordinates");
    }
    if (!pt.finite()) {
      parse_fail(path, "line " + std::to_string(lineno) + ": non-finite coordinate");
    }
    cloud.points.push_back(pt);
  }
  if (cloud.empty()) parse_fail(path, "no points found");
  return cloud;
}

PointCloud parse_off(const std::filesystem::path& path, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto next_content = [&]() -> std::string {
    while (std::getline(in, line)) {
      ++lineno;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      return line;
    }
    parse_fail(path, "line " + std::to_string(lineno) + ": unexpected end of OFF file");
  };

  std::string header = next_content();
  {
    std::istringstream hs(header);
    std::string tag;
    hs >> tag;
    if (tag != "OFF") parse_fail(path, "line " + std::to_string(lineno) + ": missing OFF header");
  }

  std::size_t nv = 0, nf = 0, ne = 0;
  {
    std::istringstream cs(next_content());
    if (!(cs >> nv >> nf >> ne)) {
      parse_fail(path, "line " + std::to_string(lineno) + ": malformed OFF count line");
    }
  }
  if (nv == 0) parse_fail(path, "line " + std::to_string(lineno) + ": OFF file has no vertices");

  PointCloud cloud;
  cloud.points.reserve(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    Point3 pt;
    if (!parse_point_line(next_content(), pt)) {
      parse_fail(path, "line " + std::to_string(lineno) + ": expected three coordinates");
    }
    if (!pt.finite()) {
      parse_fail(path, "line " + std::to_string(lineno) + ": non-finite coordinate");
    }
    cloud.points.push_back(pt);
  }
  // Faces (the next nf lines) carry no point data and are ignored.
  return cloud;
}

}  // namespace

PointCloud load_cloud(const std::filesystem::path& path) {
  const std::string bytes = read_all(path);
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kCloudMagic, 8) == 0) {
    return parse_binary(path, bytes);
  }
  // OFF sniffing: first non-space token of the first line.
  std::size_t i = 0;
  while (i < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[i]))) ++i;
  if (bytes.compare(i, 3, "OFF") == 0) return parse_off(path, bytes);
  return parse_ascii(path, bytes);
}

void save_cloud_binary(const std::filesystem::path& path, const PointCloud& cloud) {
  if (cloud.empty()) throw std::invalid_argument("save_cloud_binary: empty cloud");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(kCloudMagic, 8);
  write_u32le(out, static_cast<std::uint32_t>(cloud.size()));
  for (const Point3& p : cloud.points) {
    write_f32le(out, static_cast<float>(p.x));
    write_f32le(out, static_cast<float>(p.y));
    write_f32le(out, static_cast<float>(p.z));
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void save_cloud_ascii(const std::filesystem::path& path, const PointCloud& cloud) {
  if (cloud.empty()) throw std::invalid_argument("save_cloud_ascii: empty cloud");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  for (const Point3& p : cloud.points) out << p.x << ' ' << p.y << ' ' << p.z << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<int> load_labels(const std::filesystem::path& path, int expected) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<int> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    try {
      labels.push_back(std::stoi(line));
    } catch (const std::exception&) {
      throw std::runtime_error(path.string() + ": line " + std::to_string(lineno) +
                               ": expected an integer label");
    }
  }
  if (expected >= 0 && static_cast<int>(labels.size()) != expected) {
    throw std::runtime_error(path.string() + ": " + std::to_string(labels.size()) +
                             " labels, expected " + std::to_string(expected));
  }
  return labels;
}

void save_labels(const std::filesystem::path& path, std::span<const int> labels) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (int l : labels) out << l << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void export_ply(const std::filesystem::path& path, const PointCloud& cloud,
                std::span<const int> parts) {
  if (parts.size() != cloud.size()) {
    throw std::invalid_argument("export_ply: " + std::to_string(parts.size()) +
                                " labels for " + std::to_string(cloud.size()) + " points");
  }
  // Distinct-looking colors; part ids wrap around the palette.
  static constexpr std::array<std::array<int, 3>, 16> palette{{{230, 25, 75},
                                                               {60, 180, 75},
                                                               {255, 225, 25},
                                                               {0, 130, 200},
                                                               {245, 130, 48},
                                                               {145, 30, 180},
                                                               {70, 240, 240},
                                                               {240, 50, 230},
                                                               {210, 245, 60},
                                                               {250, 190, 212},
                                                               {0, 128, 128},
                                                               {220, 190, 255},
                                                               {170, 110, 40},
                                                               {255, 250, 200},
                                                               {128, 0, 0},
                                                               {170, 255, 195}}};

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
      << "\nproperty float x\nproperty float y\nproperty float z\n"
         "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  out.precision(9);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point3& p = cloud.points[i];
    const int part = parts[i];
    const auto& rgb = palette[static_cast<std::size_t>(((part % 16) + 16) % 16)];
    out << static_cast<float>(p.x) << ' ' << static_cast<float>(p.y) << ' '
        << static_cast<float>(p.z) << ' ' << rgb[0] << ' ' << rgb[1] << ' ' << rgb[2] << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

PointCloud normalize_unit_sphere(const PointCloud& cloud) {
  if (cloud.empty()) throw std::invalid_argument("normalize_unit_sphere: empty cloud");
  double cx = 0.0, cy = 0.0, cz = 0.0;
  for (const Point3& p : cloud.points) {
    cx += p.x;
    cy += p.y;
    cz += p.z;
  }
  const double inv = 1.0 / static_cast<double>(cloud.size());
  cx *= inv;
  cy *= inv;
  cz *= inv;

  PointCloud out;
  out.points.reserve(cloud.size());
  double max_sq = 0.0;
  for (const Point3& p : cloud.points) {
    const Point3 q{p.x - cx, p.y - cy, p.z - cz};
    max_sq = std::max(max_sq, q.x * q.x + q.y * q.y + q.z * q.z);
    out.points.push_back(q);
  }
  if (max_sq > 0.0) {
    const double s = 1.0 / std::sqrt(max_sq);
    for (Point3& p : out.points) {
      p.x *= s;
      p.y *= s;
      p.z *= s;
    }
  }
  return out;
}

}  // namespace uff
