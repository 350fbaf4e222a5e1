#pragma once

// KITTI-format ingestion, interval resampling into high-variation tracklets,
// search-area cropping/sampling and the tracklet index cache shared with the
// synthetic generator.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hvtrack/geometry.hpp"
#include "hvtrack/tensor.hpp"

namespace hvt {

enum class Category { Car, Pedestrian, Van, Cyclist, Synthetic };

const char* to_string(Category c);
Category category_from_string(const std::string& s);  // throws on unknown

struct TrackletFrame {
  PointCloud cloud;
  Box7 gt_box;
  int frame_id = 0;
  std::string cloud_source;  // original .bin path when ingested from disk
};

struct Tracklet {
  std::string id;
  Category category = Category::Car;
  Vec3 sensor_origin{0, 0, 0};
  std::vector<TrackletFrame> frames;
};

// frame_ids strictly increasing, length >= 1; throws otherwise
void validate_tracklet(const Tracklet& t);

enum class Split { train, valid, test };
Split split_from_string(const std::string& s);

// Sequences follow the usual benchmark split: 0-16 train, 17-18 valid,
// 19-20 test. Expects <root>/label_02/NNNN.txt, <root>/calib/NNNN.txt and
// <root>/velodyne/NNNN/FFFFFF.bin. Camera-frame label boxes are converted to
// the lidar frame through the calibration matrices.
std::vector<Tracklet> load_kitti_tracklets(const std::string& root, Category category,
                                           Split split);

// Interval resampling: for each tracklet emit min(len, interval) sub-tracklets,
// the i-th taking frames i, i+interval, i+2*interval, ...
std::vector<Tracklet> build_hv(const std::vector<Tracklet>& tracklets, int interval);

// Meters added to the reference box width and length before cropping.
// Table rows exist for intervals {1,2,3,5,10}; other intervals interpolate
// linearly between the bracketing rows (clamped at the ends).
double enlargement_offset(Category category, int interval);

// Points inside ref_box enlarged by `offset` in w/l (and `vertical_offset` in
// h; pass offset for the default behaviour, 0 for strict w/l-only cropping),
// returned in the canonical frame of ref_box. Boundary points are kept.
PointCloud crop_search_area(const PointCloud& cloud, const Box7& ref_box, double offset,
                            double vertical_offset);

// Exactly n points: without replacement when enough are available, with
// replacement otherwise. Deterministic per seed. Empty input -> nullopt
// ("empty search area" signal; the caller owns the fallback policy).
std::optional<PointCloud> sample_points(const PointCloud& cloud, std::size_t n,
                                        std::uint64_t seed);

// 1 where the point lies inside the oriented box (boundary inclusive)
std::vector<int> foreground_mask(const PointCloud& points, const Box7& box);

struct MotionStats {
  std::vector<std::pair<double, double>> quantiles;  // (q, meters)
  double mean = 0;
  std::size_t count = 0;
};

// xy displacement between frames `interval` apart, pooled over tracklets.
// Quantiles use linear interpolation between order statistics.
MotionStats motion_stats(const std::vector<Tracklet>& tracklets, int interval,
                         const std::vector<double>& quantiles);

// ---- tracklet index cache -------------------------------------------------
// Newline-delimited text; one `tracklet` header per sub-tracklet followed by
// one `frame` line per frame referencing a point-cloud .bin (KITTI velodyne
// layout: float32 x,y,z,intensity). Paths are resolved against the index
// file directory. Boxes are stored in the lidar frame with full precision.
//
//   hvtrack-tracklets v1
//   tracklet <id> <category> <nframes> <ox> <oy> <oz>
//   frame <frame_id> <cloud_path> <cx> <cy> <cz> <w> <l> <h> <yaw>

// Frames lacking a cloud_source are dumped as .bin files under
// <index_dir>/clouds/. Returns total frames written.
std::size_t write_tracklet_index(const std::vector<Tracklet>& tracklets,
                                 const std::string& index_path);
std::vector<Tracklet> read_tracklet_index(const std::string& index_path);

// ---- per-frame model input ------------------------------------------------

struct SearchSample {
  Tensor points;            // n_in x 3, canonical (reference box) frame
  Box7 gt_box_local;        // ground truth in the same frame
  std::vector<int> fg_mask; // n_in labels, 1 iff inside gt_box_local
  ObservationAngle gt_alpha;
};

// Crop around ref_box (enlarged by offset), sample n_in points and label
// them against the ground truth. nullopt when the crop is empty.
std::optional<SearchSample> make_search_sample(const PointCloud& cloud, const Box7& ref_box,
                                               double offset, double vertical_offset,
                                               std::size_t n_in, std::uint64_t seed,
                                               const Box7& gt_box_world,
                                               const Vec3& sensor_origin);

}  // namespace hvt
