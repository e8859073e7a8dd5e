#include "recon/pointcloud.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <queue>
#include <sstream>
#include <unordered_map>

#include "recon/kdtree.hpp"

namespace recon {

Point PointCloud::point(std::size_t i) const {
  Point p;
  p.position = positions[i];
  p.normal = has_normals() ? normals[i] : Vec3::Zero();
  if (has_labels() && labels[i] >= 0) p.room_label = labels[i];
  return p;
}

void PointCloud::push_back(const Point& p) {
  const bool with_normal = positions.empty() || has_normals();
  const bool with_label = p.room_label.has_value() || has_labels();
  if (with_label && !has_labels()) labels.assign(positions.size(), -1);
  positions.push_back(p.position);
  if (with_normal) normals.push_back(p.normal);
  if (with_label) labels.push_back(p.room_label.value_or(-1));
}

PointCloud PointCloud::select(const std::vector<int>& indices) const {
  PointCloud out;
  out.positions.reserve(indices.size());
  for (int i : indices) out.positions.push_back(positions[i]);
  if (has_normals()) {
    out.normals.reserve(indices.size());
    for (int i : indices) out.normals.push_back(normals[i]);
  }
  if (has_labels()) {
    out.labels.reserve(indices.size());
    for (int i : indices) out.labels.push_back(labels[i]);
  }
  return out;
}

namespace {

struct PlyProperty {
  std::string name;
  std::string type;
  int size = 0;
};

int ply_type_size(const std::string& t) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "float" || t == "int32" || t == "uint32" ||
      t == "float32")
    return 4;
  if (t == "double" || t == "float64") return 8;
  return 0;
}

double read_binary_value(const char* p, const std::string& t) {
  auto get = [p]<typename T>(T) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return static_cast<double>(v);
  };
  if (t == "char" || t == "int8") return get(std::int8_t{});
  if (t == "uchar" || t == "uint8") return get(std::uint8_t{});
  if (t == "short" || t == "int16") return get(std::int16_t{});
  if (t == "ushort" || t == "uint16") return get(std::uint16_t{});
  if (t == "int" || t == "int32") return get(std::int32_t{});
  if (t == "uint" || t == "uint32") return get(std::uint32_t{});
  if (t == "float" || t == "float32") return get(float{});
  return get(double{});
}

struct PlyHeader {
  bool binary = false;
  std::size_t vertex_count = 0;
  std::vector<PlyProperty> props;
};

PlyHeader read_ply_header(std::istream& in) {
  PlyHeader h;
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw ParseError("missing ply magic", 1);
  bool in_vertex = false, seen_vertex = false;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii") {
        h.binary = false;
      } else if (fmt == "binary_little_endian") {
        h.binary = true;
      } else {
        throw ParseError("unsupported ply format '" + fmt + "'", lineno);
      }
    } else if (kw == "element") {
      std::string name;
      std::size_t count = 0;
      ls >> name >> count;
      if (name == "vertex") {
        if (seen_vertex) throw ParseError("duplicate vertex element", lineno);
        h.vertex_count = count;
        in_vertex = seen_vertex = true;
      } else {
        if (!seen_vertex) throw ParseError("vertex element must come first", lineno);
        in_vertex = false;
      }
    } else if (kw == "property") {
      if (!in_vertex) continue;
      std::string type, name;
      ls >> type;
      if (type == "list") throw ParseError("list property in vertex element", lineno);
      ls >> name;
      int sz = ply_type_size(type);
      if (sz == 0) throw ParseError("unknown property type '" + type + "'", lineno);
      h.props.push_back({name, type, sz});
    } else if (kw == "end_header") {
      if (!seen_vertex) throw ParseError("no vertex element", lineno);
      return h;
    }
  }
  throw ParseError("unterminated ply header", lineno);
}

PointCloud load_ply(std::istream& in) {
  PlyHeader h = read_ply_header(in);
  std::array<int, 6> slot;
  slot.fill(-1);
  const char* names[6] = {"x", "y", "z", "nx", "ny", "nz"};
  for (std::size_t i = 0; i < h.props.size(); ++i)
    for (int s = 0; s < 6; ++s)
      if (h.props[i].name == names[s]) slot[s] = static_cast<int>(i);
  if (slot[0] < 0 || slot[1] < 0 || slot[2] < 0) throw ParseError("ply lacks x/y/z", 0);
  bool with_normals = slot[3] >= 0 && slot[4] >= 0 && slot[5] >= 0;

  PointCloud cloud;
  cloud.positions.reserve(h.vertex_count);
  if (with_normals) cloud.normals.reserve(h.vertex_count);
  std::vector<double> vals(h.props.size());
  std::size_t stride = 0;
  for (const auto& p : h.props) stride += p.size;
  std::vector<char> buf(stride);
  for (std::size_t v = 0; v < h.vertex_count; ++v) {
    if (h.binary) {
      if (!in.read(buf.data(), static_cast<std::streamsize>(stride)))
        throw ParseError("truncated binary vertex data", v + 1);
      std::size_t off = 0;
      for (std::size_t i = 0; i < h.props.size(); ++i) {
        vals[i] = read_binary_value(buf.data() + off, h.props[i].type);
        off += h.props[i].size;
      }
    } else {
      std::string line;
      do {
        if (!std::getline(in, line)) throw ParseError("truncated ascii vertex data", v + 1);
      } while (line.find_first_not_of(" \t\r") == std::string::npos);
      std::istringstream ls(line);
      for (std::size_t i = 0; i < h.props.size(); ++i)
        if (!(ls >> vals[i])) throw ParseError("malformed vertex record", v + 1);
    }
    Vec3 p(vals[slot[0]], vals[slot[1]], vals[slot[2]]);
    if (!p.allFinite()) throw ParseError("non-finite coordinate", v + 1);
    cloud.positions.push_back(p);
    if (with_normals) cloud.normals.emplace_back(vals[slot[3]], vals[slot[4]], vals[slot[5]]);
  }
  return cloud;
}

PointCloud load_xyz(std::istream& in) {
  PointCloud cloud;
  std::string line;
  std::size_t lineno = 0;
  int columns = -1;
  while (std::getline(in, line)) {
    ++lineno;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    std::vector<double> v;
    std::string tok;
    while (ls >> tok) {
      char* end = nullptr;
      double d = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0') throw ParseError("non-numeric token '" + tok + "'", lineno);
      v.push_back(d);
    }
    if (v.size() != 3 && v.size() != 6)
      throw ParseError("expected 3 or 6 values, got " + std::to_string(v.size()), lineno);
    if (columns < 0) columns = static_cast<int>(v.size());
    if (static_cast<int>(v.size()) != columns) throw ParseError("inconsistent column count", lineno);
    Vec3 p(v[0], v[1], v[2]);
    if (!p.allFinite()) throw ParseError("non-finite coordinate", lineno);
    cloud.positions.push_back(p);
    if (columns == 6) cloud.normals.emplace_back(v[3], v[4], v[5]);
  }
  return cloud;
}

}  // namespace

CloudFormat detect_format(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  if (ext != ".ply") return CloudFormat::xyz_text;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("format", 0) == 0)
      return line.find("ascii") != std::string::npos ? CloudFormat::ply_ascii
                                                     : CloudFormat::ply_binary;
    if (line.rfind("end_header", 0) == 0) break;
  }
  throw ParseError("ply header without format line", 0);
}

PointCloud load(const std::filesystem::path& path, CloudFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  PointCloud cloud = format == CloudFormat::xyz_text ? load_xyz(in) : load_ply(in);
  if (cloud.empty()) throw EmptyCloudError("'" + path.string() + "' contains no points");
  return cloud;
}

PointCloud load(const std::filesystem::path& path) { return load(path, detect_format(path)); }

void save(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  const bool nrm = cloud.has_normals();
  if (format == CloudFormat::xyz_text) {
    char buf[160];
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const Vec3& p = cloud.positions[i];
      int len = std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g", p.x(), p.y(), p.z());
      out.write(buf, len);
      if (nrm) {
        const Vec3& n = cloud.normals[i];
        len = std::snprintf(buf, sizeof buf, " %.17g %.17g %.17g", n.x(), n.y(), n.z());
        out.write(buf, len);
      }
      out.put('\n');
    }
    return;
  }
  out << "ply\nformat " << (format == CloudFormat::ply_ascii ? "ascii" : "binary_little_endian")
      << " 1.0\nelement vertex " << cloud.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n";
  if (nrm) out << "property double nx\nproperty double ny\nproperty double nz\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    double v[6] = {cloud.positions[i].x(), cloud.positions[i].y(), cloud.positions[i].z(), 0, 0, 0};
    if (nrm) {
      v[3] = cloud.normals[i].x();
      v[4] = cloud.normals[i].y();
      v[5] = cloud.normals[i].z();
    }
    int count = nrm ? 6 : 3;
    if (format == CloudFormat::ply_binary) {
      out.write(reinterpret_cast<const char*>(v), static_cast<std::streamsize>(sizeof(double) * count));
    } else {
      char buf[64];
      for (int c = 0; c < count; ++c) {
        int len = std::snprintf(buf, sizeof buf, c ? " %.17g" : "%.17g", v[c]);
        out.write(buf, len);
      }
      out.put('\n');
    }
  }
}

NormalEstimate estimate_normals(const PointCloud& cloud, std::size_t k, Exec exec) {
  if (k < 3) throw PreconditionError("estimate_normals needs k >= 3");
  if (cloud.size() < k + 1) throw PreconditionError("estimate_normals needs at least k+1 points");
  const std::size_t n = cloud.size();
  KdTree tree(cloud.positions);
  std::vector<std::vector<int>> nbrs(n);
  std::vector<Vec3> normals(n);
  std::vector<char> degenerate(n, 0);

  auto one = [&](std::size_t i) {
    nbrs[i] = tree.knn(cloud.positions[i], k + 1);
    Vec3 mean = Vec3::Zero();
    for (int j : nbrs[i]) mean += cloud.positions[j];
    mean /= static_cast<double>(nbrs[i].size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (int j : nbrs[i]) {
      Vec3 d = cloud.positions[j] - mean;
      cov += d * d.transpose();
    }
    if (cov.trace() <= 1e-24) {
      normals[i] = Vec3::UnitZ();
      degenerate[i] = 1;
      return;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
    normals[i] = es.eigenvectors().col(0).normalized();
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 256)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) one(static_cast<std::size_t>(i));
  } else {
    for (std::size_t i = 0; i < n; ++i) one(i);
  }

  // Orientation: Prim's MST over the symmetric k-NN graph with weight 1 - |ni.nj|,
  // flipping each child to agree with its parent.
  std::vector<std::vector<int>> adj(n);
  for (std::size_t i = 0; i < n; ++i)
    for (int j : nbrs[i])
      if (j != static_cast<int>(i)) {
        adj[i].push_back(j);
        adj[j].push_back(static_cast<int>(i));
      }
  std::vector<char> done(n, 0);
  std::vector<int> component(n, -1);
  int ncomp = 0;
  using Item = std::tuple<double, int, int>;  // weight, node, parent
  for (std::size_t root = 0; root < n; ++root) {
    if (done[root]) continue;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    pq.emplace(0.0, static_cast<int>(root), -1);
    while (!pq.empty()) {
      auto [w, v, parent] = pq.top();
      pq.pop();
      if (done[v]) continue;
      done[v] = 1;
      component[v] = ncomp;
      if (parent >= 0 && normals[v].dot(normals[parent]) < 0) normals[v] = -normals[v];
      for (int u : adj[v])
        if (!done[u]) pq.emplace(1.0 - std::abs(normals[v].dot(normals[u])), u, v);
    }
    ++ncomp;
  }

  // Global flip per component: floor-like points (near-vertical normal, lowest third) vote for +z.
  std::vector<std::vector<int>> members(ncomp);
  for (std::size_t i = 0; i < n; ++i) members[component[i]].push_back(static_cast<int>(i));
  for (auto& m : members) {
    std::vector<int> flat;
    for (int i : m)
      if (std::abs(normals[i].z()) > 0.9) flat.push_back(i);
    if (flat.empty()) continue;
    std::sort(flat.begin(), flat.end(),
              [&](int a, int b) { return cloud.positions[a].z() < cloud.positions[b].z(); });
    std::size_t take = std::max<std::size_t>(1, flat.size() / 3);
    long vote = 0;
    for (std::size_t t = 0; t < take; ++t) vote += normals[flat[t]].z() > 0 ? 1 : -1;
    if (vote < 0)
      for (int i : m) normals[i] = -normals[i];
  }

  NormalEstimate out;
  out.cloud = cloud;
  out.cloud.normals = std::move(normals);
  for (std::size_t i = 0; i < n; ++i)
    if (degenerate[i]) out.degenerate.push_back(static_cast<int>(i));
  return out;
}

PointCloud subsample(const PointCloud& cloud, double min_dist) {
  if (!(min_dist > 0)) throw PreconditionError("subsample needs min_dist > 0");
  struct Key {
    std::int64_t x, y, z;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      std::uint64_t h = static_cast<std::uint64_t>(k.x) * 73856093ULL;
      h ^= static_cast<std::uint64_t>(k.y) * 19349663ULL;
      h ^= static_cast<std::uint64_t>(k.z) * 83492791ULL;
      return static_cast<std::size_t>(h);
    }
  };
  std::unordered_map<Key, int, KeyHash> slot;
  std::vector<std::vector<int>> voxels;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.positions[i];
    Key key{static_cast<std::int64_t>(std::floor(p.x() / min_dist)),
            static_cast<std::int64_t>(std::floor(p.y() / min_dist)),
            static_cast<std::int64_t>(std::floor(p.z() / min_dist))};
    auto [it, inserted] = slot.try_emplace(key, static_cast<int>(voxels.size()));
    if (inserted) voxels.emplace_back();
    voxels[it->second].push_back(static_cast<int>(i));
  }
  std::vector<int> keep;
  keep.reserve(voxels.size());
  for (const auto& v : voxels) {
    Vec3 c = Vec3::Zero();
    for (int i : v) c += cloud.positions[i];
    c /= static_cast<double>(v.size());
    int best = v.front();
    double bd = (cloud.positions[best] - c).squaredNorm();
    for (int i : v) {
      double d = (cloud.positions[i] - c).squaredNorm();
      if (d < bd) {
        bd = d;
        best = i;
      }
    }
    keep.push_back(best);
  }
  return cloud.select(keep);
}

}  // namespace recon
