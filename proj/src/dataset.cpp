#include "hvtrack/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "hvtrack/rng.hpp"

namespace fs = std::filesystem;

namespace hvt {

const char* to_string(Category c) {
  switch (c) {
    case Category::Car: return "Car";
    case Category::Pedestrian: return "Pedestrian";
    case Category::Van: return "Van";
    case Category::Cyclist: return "Cyclist";
    case Category::Synthetic: return "Synthetic";
  }
  return "?";
}

Category category_from_string(const std::string& s) {
  if (s == "Car") return Category::Car;
  if (s == "Pedestrian") return Category::Pedestrian;
  if (s == "Van") return Category::Van;
  if (s == "Cyclist") return Category::Cyclist;
  if (s == "Synthetic") return Category::Synthetic;
  throw std::invalid_argument("unknown category: " + s);
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "valid" || s == "val") return Split::valid;
  if (s == "test") return Split::test;
  throw std::invalid_argument("unknown split: " + s + " (expected train|valid|test)");
}

void validate_tracklet(const Tracklet& t) {
  if (t.frames.empty()) throw std::invalid_argument("tracklet " + t.id + " has no frames");
  for (std::size_t i = 1; i < t.frames.size(); ++i)
    if (t.frames[i].frame_id <= t.frames[i - 1].frame_id)
      throw std::invalid_argument("tracklet " + t.id + ": frame ids not strictly increasing");
}

// ------------------------------------------------------------------- KITTI

namespace {

using Mat4 = std::array<double, 16>;

Mat4 mat4_identity() {
  Mat4 m{};
  m[0] = m[5] = m[10] = m[15] = 1.0;
  return m;
}

Mat4 mat4_mul(const Mat4& a, const Mat4& b) {
  Mat4 c{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) c[i * 4 + j] += a[i * 4 + k] * b[k * 4 + j];
  return c;
}

// Gauss-Jordan; calibration matrices are well conditioned
Mat4 mat4_inverse(const Mat4& in) {
  std::array<double, 32> a{};
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) a[i * 8 + j] = in[i * 4 + j];
    a[i * 8 + 4 + i] = 1.0;
  }
  for (int col = 0; col < 4; ++col) {
    int piv = col;
    for (int r = col + 1; r < 4; ++r)
      if (std::abs(a[r * 8 + col]) > std::abs(a[piv * 8 + col])) piv = r;
    if (std::abs(a[piv * 8 + col]) < 1e-12)
      throw std::runtime_error("singular calibration matrix");
    if (piv != col)
      for (int j = 0; j < 8; ++j) std::swap(a[col * 8 + j], a[piv * 8 + j]);
    const double inv = 1.0 / a[col * 8 + col];
    for (int j = 0; j < 8; ++j) a[col * 8 + j] *= inv;
    for (int r = 0; r < 4; ++r) {
      if (r == col) continue;
      const double f = a[r * 8 + col];
      if (f == 0.0) continue;
      for (int j = 0; j < 8; ++j) a[r * 8 + j] -= f * a[col * 8 + j];
    }
  }
  Mat4 out{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) out[i * 4 + j] = a[i * 8 + 4 + j];
  return out;
}

Vec3 mat4_apply(const Mat4& m, const Vec3& p) {
  return {m[0] * p.x + m[1] * p.y + m[2] * p.z + m[3],
          m[4] * p.x + m[5] * p.y + m[6] * p.z + m[7],
          m[8] * p.x + m[9] * p.y + m[10] * p.z + m[11]};
}

// cam = R_rect * Tr_velo_cam * velo; we need the inverse for labels
Mat4 load_cam_to_velo(const std::string& calib_path) {
  std::ifstream in(calib_path);
  if (!in) throw std::runtime_error("cannot open calibration file: " + calib_path);
  Mat4 tr = mat4_identity(), rect = mat4_identity();
  bool have_tr = false, have_rect = false;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (!key.empty() && key.back() == ':') key.pop_back();
    if (key == "Tr_velo_cam" || key == "Tr_velo_to_cam") {
      for (int i = 0; i < 12; ++i)
        if (!(ls >> tr[i])) throw std::runtime_error("truncated " + key + " in " + calib_path);
      have_tr = true;
    } else if (key == "R0_rect" || key == "R_rect") {
      double r[9];
      for (int i = 0; i < 9; ++i)
        if (!(ls >> r[i])) throw std::runtime_error("truncated " + key + " in " + calib_path);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) rect[i * 4 + j] = r[i * 3 + j];
      have_rect = true;
    }
  }
  if (!have_tr) throw std::runtime_error("missing Tr_velo_cam in " + calib_path);
  if (!have_rect) throw std::runtime_error("missing R0_rect in " + calib_path);
  return mat4_inverse(mat4_mul(rect, tr));
}

PointCloud load_velodyne_bin(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open lidar file: " + path);
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  if (bytes % 16 != 0)
    throw std::runtime_error("corrupt lidar file (size not a multiple of 16): " + path);
  const std::size_t n = bytes / 16;
  std::vector<float> raw(n * 4);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw std::runtime_error("short read on lidar file: " + path);
  PointCloud pc;
  pc.points.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    pc.points[i] = {double(raw[i * 4]), double(raw[i * 4 + 1]), double(raw[i * 4 + 2])};
  return pc;
}

struct LabelRow {
  int frame = 0;
  int track_id = 0;
  std::string type;
  double h = 0, w = 0, l = 0;
  double x = 0, y = 0, z = 0;  // camera frame, bottom center
  double rotation_y = 0;
};

std::vector<LabelRow> load_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open label file: " + path);
  std::vector<LabelRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    LabelRow r;
    double trunc, occl, alpha, b0, b1, b2, b3;
    if (!(ls >> r.frame >> r.track_id >> r.type >> trunc >> occl >> alpha >> b0 >> b1 >>
          b2 >> b3 >> r.h >> r.w >> r.l >> r.x >> r.y >> r.z >> r.rotation_y))
      throw std::runtime_error("malformed label line in " + path + ": " + line);
    rows.push_back(r);
  }
  return rows;
}

std::vector<int> split_sequences(Split s) {
  switch (s) {
    case Split::train: {
      std::vector<int> v;
      for (int i = 0; i <= 16; ++i) v.push_back(i);
      return v;
    }
    case Split::valid: return {17, 18};
    case Split::test: return {19, 20};
  }
  return {};
}

std::string seq_name(int seq) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d", seq);
  return buf;
}

std::string frame_name(int frame) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06d", frame);
  return buf;
}

}  // namespace

std::vector<Tracklet> load_kitti_tracklets(const std::string& root, Category category,
                                           Split split) {
  if (category == Category::Synthetic)
    throw std::invalid_argument("Synthetic is not a KITTI category");
  const fs::path label_dir = fs::path(root) / "label_02";
  if (!fs::is_directory(label_dir))
    throw std::runtime_error("missing label directory: " + label_dir.string());

  std::vector<Tracklet> out;
  for (int seq : split_sequences(split)) {
    const fs::path label_path = label_dir / (seq_name(seq) + ".txt");
    if (!fs::exists(label_path)) continue;  // split filter over the sequences present
    const fs::path calib_path = fs::path(root) / "calib" / (seq_name(seq) + ".txt");
    const Mat4 cam_to_velo = load_cam_to_velo(calib_path.string());

    // rows grouped per track id, label order already frame-sorted in KITTI
    std::map<int, std::vector<LabelRow>> per_track;
    for (const auto& row : load_labels(label_path.string())) {
      if (row.type != to_string(category)) continue;
      per_track[row.track_id].push_back(row);
    }

    for (auto& [tid, rows] : per_track) {
      std::sort(rows.begin(), rows.end(),
                [](const LabelRow& a, const LabelRow& b) { return a.frame < b.frame; });
      Tracklet t;
      t.id = seq_name(seq) + ":" + std::to_string(tid);
      t.category = category;
      for (const auto& r : rows) {
        TrackletFrame f;
        f.frame_id = r.frame;
        const fs::path bin =
            fs::path(root) / "velodyne" / seq_name(seq) / (frame_name(r.frame) + ".bin");
        f.cloud = load_velodyne_bin(bin.string());
        f.cloud_source = bin.string();
        // label location is the bottom-face center in the camera frame
        const Vec3 center_cam{r.x, r.y - 0.5 * r.h, r.z};
        const Vec3 c = mat4_apply(cam_to_velo, center_cam);
        const double yaw = wrap_angle(-r.rotation_y - std::numbers::pi / 2.0);
        f.gt_box = Box7(c.x, c.y, c.z, r.w, r.l, r.h, yaw);
        t.frames.push_back(std::move(f));
      }
      validate_tracklet(t);
      out.push_back(std::move(t));
    }
  }
  return out;
}

// ----------------------------------------------------------------- HV build

std::vector<Tracklet> build_hv(const std::vector<Tracklet>& tracklets, int interval) {
  if (interval < 1) throw std::invalid_argument("build_hv: interval must be >= 1");
  std::vector<Tracklet> out;
  for (const auto& t : tracklets) {
    const std::size_t starts = std::min<std::size_t>(t.frames.size(), std::size_t(interval));
    for (std::size_t s = 0; s < starts; ++s) {
      Tracklet sub;
      sub.id = t.id + "/i" + std::to_string(interval) + "s" + std::to_string(s);
      sub.category = t.category;
      sub.sensor_origin = t.sensor_origin;
      for (std::size_t i = s; i < t.frames.size(); i += std::size_t(interval))
        sub.frames.push_back(t.frames[i]);
      out.push_back(std::move(sub));
    }
  }
  return out;
}

double enlargement_offset(Category category, int interval) {
  if (interval < 1) throw std::invalid_argument("enlargement_offset: interval must be >= 1");
  static const int kIntervals[5] = {1, 2, 3, 5, 10};
  static const std::map<Category, std::array<double, 5>> kTable = {
      {Category::Car, {2, 2, 3, 4, 7}},
      {Category::Pedestrian, {2, 2, 2, 2, 3}},
      {Category::Van, {2, 3, 3, 5, 8}},
      {Category::Cyclist, {2, 2, 2, 3, 4}},
  };
  const auto it = kTable.find(category);
  if (it == kTable.end())
    throw std::invalid_argument(std::string("no enlargement offset for category ") +
                                to_string(category));
  const auto& row = it->second;
  if (interval >= kIntervals[4]) return row[4];
  for (int i = 0; i < 5; ++i)
    if (interval == kIntervals[i]) return row[i];
  int lo = 0;
  while (kIntervals[lo + 1] < interval) ++lo;
  const double t = double(interval - kIntervals[lo]) / double(kIntervals[lo + 1] - kIntervals[lo]);
  return row[lo] + t * (row[lo + 1] - row[lo]);
}

PointCloud crop_search_area(const PointCloud& cloud, const Box7& ref_box, double offset,
                            double vertical_offset) {
  if (offset < 0) throw std::invalid_argument("crop_search_area: offset must be >= 0");
  if (vertical_offset < 0)
    throw std::invalid_argument("crop_search_area: vertical offset must be >= 0");
  const double hx = 0.5 * (ref_box.l + offset);
  const double hy = 0.5 * (ref_box.w + offset);
  const double hz = 0.5 * (ref_box.h + vertical_offset);
  PointCloud out;
  for (const auto& p : cloud.points) {
    const Vec3 q = to_local_point(p, ref_box);
    if (std::abs(q.x) <= hx && std::abs(q.y) <= hy && std::abs(q.z) <= hz)
      out.points.push_back(q);
  }
  return out;
}

std::optional<PointCloud> sample_points(const PointCloud& cloud, std::size_t n,
                                        std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_points: n must be >= 1");
  if (cloud.empty()) return std::nullopt;
  Rng rng(seed);
  PointCloud out;
  out.points.reserve(n);
  if (cloud.size() >= n) {
    // partial Fisher-Yates: first n entries of a random permutation
    std::vector<std::uint32_t> idx(cloud.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = std::uint32_t(i);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = i + rng.index(idx.size() - i);
      std::swap(idx[i], idx[j]);
      out.points.push_back(cloud.points[idx[i]]);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i)
      out.points.push_back(cloud.points[rng.index(cloud.size())]);
  }
  return out;
}

std::vector<int> foreground_mask(const PointCloud& points, const Box7& box) {
  std::vector<int> mask(points.size());
  for (std::size_t i = 0; i < points.size(); ++i)
    mask[i] = point_in_box(points.points[i], box) ? 1 : 0;
  return mask;
}

MotionStats motion_stats(const std::vector<Tracklet>& tracklets, int interval,
                         const std::vector<double>& quantiles) {
  if (interval < 1) throw std::invalid_argument("motion_stats: interval must be >= 1");
  std::vector<double> disp;
  for (const auto& t : tracklets)
    for (std::size_t i = 0; i + std::size_t(interval) < t.frames.size(); ++i) {
      const Box7& a = t.frames[i].gt_box;
      const Box7& b = t.frames[i + std::size_t(interval)].gt_box;
      disp.push_back(std::hypot(b.cx - a.cx, b.cy - a.cy));
    }
  if (disp.empty()) throw std::runtime_error("motion_stats: no displacement pairs");
  std::sort(disp.begin(), disp.end());

  MotionStats stats;
  stats.count = disp.size();
  double acc = 0;
  for (double d : disp) acc += d;
  stats.mean = acc / double(disp.size());
  for (double q : quantiles) {
    if (q < 0.0 || q > 1.0) throw std::invalid_argument("motion_stats: quantile out of [0,1]");
    const double h = q * double(disp.size() - 1);
    const std::size_t lo = std::size_t(h);
    const double frac = h - double(lo);
    const double v = lo + 1 < disp.size() ? disp[lo] + frac * (disp[lo + 1] - disp[lo])
                                          : disp[lo];
    stats.quantiles.emplace_back(q, v);
  }
  return stats;
}

// ------------------------------------------------------------- index cache

std::size_t write_tracklet_index(const std::vector<Tracklet>& tracklets,
                                 const std::string& index_path) {
  const fs::path dir = fs::path(index_path).parent_path();
  if (!dir.empty()) fs::create_directories(dir);
  std::ofstream out(index_path);
  if (!out) throw std::runtime_error("cannot write index file: " + index_path);
  out.precision(17);
  out << "hvtrack-tracklets v1\n";

  std::size_t frames = 0;
  std::size_t dumped = 0;
  for (const auto& t : tracklets) {
    validate_tracklet(t);
    out << "tracklet " << t.id << ' ' << to_string(t.category) << ' ' << t.frames.size()
        << ' ' << t.sensor_origin.x << ' ' << t.sensor_origin.y << ' ' << t.sensor_origin.z
        << '\n';
    for (const auto& f : t.frames) {
      std::string ref = f.cloud_source;
      if (ref.empty()) {
        const fs::path clouds = (dir.empty() ? fs::path(".") : dir) / "clouds";
        fs::create_directories(clouds);
        const fs::path bin = clouds / ("c" + std::to_string(dumped++) + ".bin");
        std::ofstream bo(bin, std::ios::binary);
        if (!bo) throw std::runtime_error("cannot write cloud file: " + bin.string());
        for (const auto& p : f.cloud.points) {
          const float rec[4] = {float(p.x), float(p.y), float(p.z), 0.0f};
          bo.write(reinterpret_cast<const char*>(rec), sizeof rec);
        }
        ref = (fs::path("clouds") / bin.filename()).string();
      }
      const Box7& b = f.gt_box;
      out << "frame " << f.frame_id << ' ' << ref << ' ' << b.cx << ' ' << b.cy << ' '
          << b.cz << ' ' << b.w << ' ' << b.l << ' ' << b.h << ' ' << b.yaw << '\n';
      ++frames;
    }
  }
  return frames;
}

std::vector<Tracklet> read_tracklet_index(const std::string& index_path) {
  std::ifstream in(index_path);
  if (!in) throw std::runtime_error("cannot open index file: " + index_path);
  const fs::path dir = fs::path(index_path).parent_path();

  std::string header;
  std::getline(in, header);
  if (header != "hvtrack-tracklets v1")
    throw std::runtime_error("unrecognized index header in " + index_path);

  std::vector<Tracklet> out;
  std::string tag;
  while (in >> tag) {
    if (tag == "tracklet") {
      Tracklet t;
      std::string cat;
      std::size_t nframes = 0;
      if (!(in >> t.id >> cat >> nframes >> t.sensor_origin.x >> t.sensor_origin.y >>
            t.sensor_origin.z))
        throw std::runtime_error("malformed tracklet header in " + index_path);
      t.category = category_from_string(cat);
      t.frames.reserve(nframes);
      out.push_back(std::move(t));
    } else if (tag == "frame") {
      if (out.empty()) throw std::runtime_error("frame before tracklet in " + index_path);
      TrackletFrame f;
      std::string ref;
      double cx, cy, cz, w, l, h, yaw;
      if (!(in >> f.frame_id >> ref >> cx >> cy >> cz >> w >> l >> h >> yaw))
        throw std::runtime_error("malformed frame line in " + index_path);
      f.gt_box = Box7(cx, cy, cz, w, l, h, yaw);
      fs::path bin(ref);
      if (bin.is_relative()) bin = dir / bin;
      f.cloud = load_velodyne_bin(bin.string());
      f.cloud_source = bin.string();
      out.back().frames.push_back(std::move(f));
    } else {
      throw std::runtime_error("unknown record '" + tag + "' in " + index_path);
    }
  }
  for (const auto& t : out) validate_tracklet(t);
  return out;
}

// ------------------------------------------------------------ search sample

std::optional<SearchSample> make_search_sample(const PointCloud& cloud, const Box7& ref_box,
                                               double offset, double vertical_offset,
                                               std::size_t n_in, std::uint64_t seed,
                                               const Box7& gt_box_world,
                                               const Vec3& sensor_origin) {
  const PointCloud cropped = crop_search_area(cloud, ref_box, offset, vertical_offset);
  const auto sampled = sample_points(cropped, n_in, seed);
  if (!sampled) return std::nullopt;

  SearchSample s;
  s.points = Tensor(n_in, 3);
  for (std::size_t i = 0; i < n_in; ++i) {
    s.points.at(i, 0) = sampled->points[i].x;
    s.points.at(i, 1) = sampled->points[i].y;
    s.points.at(i, 2) = sampled->points[i].z;
  }
  s.gt_box_local = box_to_local(gt_box_world, ref_box);
  s.fg_mask = foreground_mask(*sampled, s.gt_box_local);
  s.gt_alpha = observation_angle(gt_box_world, sensor_origin);
  return s;
}

}  // namespace hvt
