#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "hvtrack/metrics.hpp"
#include "hvtrack/rng.hpp"

using namespace hvt;

namespace {

TrackRun make_run(const std::string& id, Category cat,
                  const std::vector<std::pair<Box7, Box7>>& frames, double wall_each) {
  TrackRun r;
  r.tracklet_id = id;
  r.category = cat;
  int fid = 0;
  for (const auto& [pred, gt] : frames) {
    r.frame_ids.push_back(fid++);
    r.predicted.push_back(pred);
    r.gt.push_back(gt);
    r.wall_time.push_back(wall_each);
  }
  return r;
}

}  // namespace

TEST_SUITE_BEGIN("metrics");

TEST_CASE("success score: hand-counted grid values") {
  CHECK(success_score({1.0, 1.0, 1.0}) == doctest::Approx(95.238095).epsilon(1e-6));
  CHECK(success_score({0.0, 0.0}) == 0.0);
  CHECK(success_score({0.5}) == doctest::Approx(47.619048).epsilon(1e-6));
  CHECK_THROWS(success_score({}));
}

TEST_CASE("precision score: hand-counted grid values") {
  CHECK(precision_score({0.0, 0.0}) == doctest::Approx(95.238095).epsilon(1e-6));
  CHECK(precision_score({2.0, 5.0}) == 0.0);
  CHECK(precision_score({1.0}) == doctest::Approx(47.619048).epsilon(1e-6));
  CHECK_THROWS(precision_score({}));
}

TEST_CASE("monotone and permutation invariant on random lists") {
  Rng rng(61);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.index(40);
    std::vector<double> ious(n), dists(n);
    for (std::size_t i = 0; i < n; ++i) {
      ious[i] = rng.uniform(0, 1);
      dists[i] = rng.uniform(0, 3);
    }
    const double s0 = success_score(ious);
    const double p0 = precision_score(dists);

    // improving any element never lowers the score
    std::vector<double> better_iou = ious, better_dist = dists;
    const std::size_t j = rng.index(n);
    better_iou[j] = std::min(1.0, better_iou[j] + rng.uniform(0, 0.5));
    better_dist[j] = std::max(0.0, better_dist[j] - rng.uniform(0, 1.0));
    CHECK(success_score(better_iou) >= s0);
    CHECK(precision_score(better_dist) <= 100.0);
    CHECK(precision_score(better_dist) >= p0);

    // frame order is irrelevant
    std::vector<double> shuffled = ious;
    for (std::size_t i = shuffled.size(); i > 1; --i)
      std::swap(shuffled[i - 1], shuffled[rng.index(i)]);
    CHECK(success_score(shuffled) == doctest::Approx(s0).epsilon(1e-12));

    CHECK(s0 >= 0.0);
    CHECK(s0 <= 100.0);
  }
}

TEST_CASE("evaluate: weighting, single-run identity, fps") {
  const Box7 unit(0, 0, 0, 1, 1, 1, 0);
  const Box7 shifted(0.5, 0, 0, 1, 1, 1, 0);

  // perfect two-frame run and a single-frame run with IoU 1/3, dist 0.5
  const TrackRun a = make_run("a", Category::Car, {{unit, unit}, {unit, unit}}, 0.1);
  const TrackRun b = make_run("b", Category::Pedestrian, {{shifted, unit}}, 0.05);

  const OPEReport single = evaluate({a});
  CHECK(single.success == doctest::Approx(95.238095).epsilon(1e-6));
  CHECK(single.precision == doctest::Approx(95.238095).epsilon(1e-6));

  const OPEReport rep = evaluate({a, b});
  const double sb = success_score({1.0 / 3.0});
  const double pb = precision_score({0.5});
  CHECK(rep.success == doctest::Approx((2 * 95.238095 + sb) / 3.0).epsilon(1e-6));
  CHECK(rep.precision == doctest::Approx((2 * 95.238095 + pb) / 3.0).epsilon(1e-6));
  CHECK(rep.total_frames == 3);
  CHECK(rep.mean_fps == doctest::Approx(3.0 / 0.25));
  CHECK(rep.frames_per_category.at("Car") == 2);
  CHECK(rep.frames_per_category.at("Pedestrian") == 1);

  // equal-length runs aggregate to the arithmetic mean
  const TrackRun c = make_run("c", Category::Car, {{shifted, unit}, {shifted, unit}}, 0.1);
  const OPEReport equal = evaluate({a, c});
  CHECK(equal.success ==
        doctest::Approx((95.238095 + success_score({1. / 3, 1. / 3})) / 2).epsilon(1e-6));

  // skipped runs are counted but not scored
  TrackRun sk;
  sk.tracklet_id = "dead";
  sk.skipped = true;
  const OPEReport with_skip = evaluate({a, sk});
  CHECK(with_skip.skipped_tracklets == 1);
  CHECK(with_skip.total_frames == 2);
  CHECK_THROWS(evaluate({}));
}

TEST_CASE("golden report text") {
  const Box7 unit(0, 0, 0, 1, 1, 1, 0);
  const Box7 shifted(0.5, 0, 0, 1, 1, 1, 0);
  const TrackRun a = make_run("a", Category::Car, {{unit, unit}, {unit, unit}}, 0.1);
  const TrackRun b = make_run("b", Category::Pedestrian, {{shifted, unit}}, 0.05);
  const std::string text = report_text(evaluate({a, b}));

  const std::string golden =
      "hvtrack-report v1\n"
      "success = 74.60\n"
      "precision = 87.30\n"
      "frames = 3\n"
      "tracklets = 2\n"
      "skipped = 0\n"
      "mean_fps = 12.00\n"
      "category Car frames = 2\n"
      "category Pedestrian frames = 1\n"
      "\n"
      "id category frames success precision\n"
      "a Car 2 95.24 95.24\n"
      "b Pedestrian 1 33.33 71.43\n";
  CHECK(text == golden);
}

TEST_CASE("pooled curves: perfect run is flat at 1 below the top threshold") {
  const Box7 unit(0, 0, 0, 1, 1, 1, 0);
  const TrackRun a = make_run("a", Category::Car, {{unit, unit}, {unit, unit}}, 0.1);
  const OPEReport rep = evaluate({a});
  REQUIRE(rep.success_curve.size() == 21);
  for (std::size_t i = 0; i + 1 < rep.success_curve.size(); ++i)
    CHECK(rep.success_curve[i] == 1.0);
  CHECK(rep.success_curve.back() == 0.0);  // IoU > 1.0 never holds
  // distance 0: below every positive threshold
  for (std::size_t i = 1; i < rep.precision_curve.size(); ++i)
    CHECK(rep.precision_curve[i] == 1.0);
  CHECK(rep.precision_curve.front() == 0.0);
}

TEST_SUITE_END();
