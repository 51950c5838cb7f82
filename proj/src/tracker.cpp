#include "motion6d/tracker.hpp"

#include "motion6d/errors.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace motion6d::track {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

void push_pose_error(TrackReport& r, const char* const (&names)[5], const Pose& pred, const Pose& gt) {
  const Vec3 d = (pred.position - gt.position) * 100.0;
  r.series[names[0]].push_back(std::abs(d.x()));
  r.series[names[1]].push_back(std::abs(d.y()));
  r.series[names[2]].push_back(std::abs(d.z()));
  r.series[names[3]].push_back(d.norm());
  r.series[names[4]].push_back(geodesic_angle(pred.orientation, gt.orientation) * kRadToDeg);
}

double median(std::vector<long> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return static_cast<double>(*mid);
}

}  // namespace

const std::vector<double>& TrackReport::at(const std::string& metric) const {
  const auto it = series.find(metric);
  if (it == series.end()) throw Error("no metric " + metric + " in report");
  return it->second;
}

double TrackReport::mean(const std::string& metric, int first, int last) const {
  const auto& v = at(metric);
  first = std::max(first, 1);
  last = std::min(last, static_cast<int>(v.size()));
  if (last < first) throw Error("empty frame range for " + metric);
  double s = 0.0;
  for (int t = first; t <= last; ++t) s += v[t - 1];
  return s / (last - first + 1);
}

StepOutput track_step(EstimatorBundle& bundle, const Image& prev_rgb, const Image& prev_mask, const Image& curr_rgb,
                      const StepTruth* truth, std::vector<long>& areas) {
  StepOutput out;
  try {
    out.mask = bundle.segmentation->step(prev_rgb, prev_mask, curr_rgb, truth);
  } catch (const EmptyMask&) {
    out.low_confidence = true;
  }
  const long area = out.mask.empty() ? 0 : mask_area(out.mask);
  if (area == 0) {
    out.mask = prev_mask;
    out.low_confidence = true;
  } else {
    if (!areas.empty() && area < kLowAreaFraction * median(areas)) out.low_confidence = true;
    areas.push_back(area);
  }
  try {
    out.delta.translation = bundle.translation->step(prev_rgb, prev_mask, curr_rgb, out.mask, truth);
    out.delta.rotation = bundle.rotation->step(prev_rgb, prev_mask, curr_rgb, out.mask, truth);
  } catch (const EmptyMask&) {
    out.delta = MotionDelta::identity();
    out.low_confidence = true;
  }
  return out;
}

TrackResult track_sequence(const synth::SequenceSample& sample, int object, EstimatorBundle& bundle,
                           const std::optional<Pose>& anchor) {
  if (object < 0 || object >= sample.num_objects) throw Error("track_sequence: object index out of range");
  const CameraIntrinsics& K = sample.intrinsics;
  const int T = sample.length();
  bundle.reset_state();

  TrackResult res;
  TrackReport& rep = res.report;
  rep.estimator = bundle.description;
  rep.object = object;
  rep.num_objects = sample.num_objects;

  Image prev_mask = sample.mask(0, object);
  mask_stats(prev_mask);  // frame-0 mask must exist
  std::vector<long> areas{mask_area(prev_mask)};
  res.masks.push_back(prev_mask);

  NonMetricState state = anchor ? NonMetricState::from_pose(*anchor) : NonMetricState{};
  res.trajectory.push_back(state.to_pose());

  for (int t = 1; t < T; ++t) {
    const Pose& gt_prev = sample.poses[t - 1][object];
    const Pose& gt_curr = sample.poses[t][object];
    const StepTruth truth{gt_prev, gt_curr, K, sample.mask(t, object)};
    const Image& prev_rgb = sample.frames[t - 1];
    const Image& curr_rgb = sample.frames[t];

    StepOutput out = track_step(bundle, prev_rgb, prev_mask, curr_rgb, &truth, areas);
    const MotionDelta& md = out.delta;
    Image& curr_mask = out.mask;
    const bool low = out.low_confidence;
    res.deltas.push_back(md);
    state.apply(md, K);
    res.trajectory.push_back(state.to_pose());
    res.masks.push_back(curr_mask);

    const NonMetricDelta gt_delta = translation_delta(gt_prev, gt_curr, K);
    rep.raw_step_error.push_back(md.translation + (-gt_delta));
    push_pose_error(rep, kStepMetrics, integrate_delta(gt_prev, md, K), gt_curr);
    if (anchor) push_pose_error(rep, kIntegratedMetrics, res.trajectory.back(), gt_curr);
    rep.series["iou"].push_back(mask_iou(curr_mask, truth.curr_mask));
    rep.series["low_confidence"].push_back(low ? 1.0 : 0.0);
    rep.low_confidence.push_back(low);
    prev_mask = std::move(curr_mask);
  }
  return res;
}

TrackReport baseline_static(const synth::SequenceSample& sample, int object) {
  TrackReport rep;
  rep.estimator = "static";
  rep.object = object;
  rep.num_objects = sample.num_objects;
  const Pose& start = sample.poses[0][object];
  for (int t = 1; t < sample.length(); ++t) {
    const Pose& gt_prev = sample.poses[t - 1][object];
    const Pose& gt_curr = sample.poses[t][object];
    rep.raw_step_error.push_back(-translation_delta(gt_prev, gt_curr, sample.intrinsics));
    push_pose_error(rep, kStepMetrics, gt_prev, gt_curr);
    push_pose_error(rep, kIntegratedMetrics, start, gt_curr);
    rep.low_confidence.push_back(false);
  }
  return rep;
}

std::vector<CurveRow> aggregate(const std::vector<TrackReport>& reports, const std::string& config) {
  std::vector<CurveRow> rows;
  if (reports.empty()) return rows;
  for (const auto& [metric, first_series] : reports.front().series) {
    for (std::size_t i = 0; i < first_series.size(); ++i) {
      double s = 0.0, s2 = 0.0;
      int n = 0;
      for (const auto& r : reports) {
        const auto it = r.series.find(metric);
        if (it == r.series.end() || i >= it->second.size()) continue;
        s += it->second[i];
        s2 += it->second[i] * it->second[i];
        ++n;
      }
      const double mean = s / n;
      const double var = n > 1 ? std::max(0.0, (s2 - n * mean * mean) / (n - 1)) : 0.0;
      rows.push_back({static_cast<int>(i) + 1, metric, mean, std::sqrt(var / n), config});
    }
  }
  return rows;
}

std::string config_label(const std::string& spec, const std::string& split) {
  if (spec == "neural") return "pred-" + split;
  if (spec == "neural+gtmask") return "gtmask-" + split;
  return spec + "-" + split;
}

SplitEvaluation evaluate_split(const synth::Dataset& data, const std::string& split, const std::string& spec,
                               const CheckpointSet& weights, int max_samples, int workers, PrevMaskMode mode) {
  SplitEvaluation ev;
  ev.config = config_label(spec, split);
  int n = data.num_samples();
  if (max_samples >= 0) n = std::min(n, max_samples);
  make_bundle(spec, weights, 0, mode);  // validate before spawning workers
  ev.reports.resize(n);
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, workers))
  for (int k = 0; k < n; ++k) {
    try {
      const auto ref = data.sample(k);
      const synth::SequenceSample s = data.load(ref.sequence);
      EstimatorBundle b = make_bundle(spec, weights, synth::sequence_seed(0x7ac4, k), mode);
      ev.reports[k] = track_sequence(s, ref.object, b, s.poses[0][ref.object]).report;
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  ev.rows = aggregate(ev.reports, ev.config);
  return ev;
}

void write_curve_table(std::ostream& os, const std::vector<CurveRow>& rows) {
  os << "frame\tmetric\tmean\tstderr\tconfig\n" << std::setprecision(9);
  for (const auto& r : rows) os << r.frame << '\t' << r.metric << '\t' << r.mean << '\t' << r.stderr_ << '\t' << r.config << '\n';
}

void write_curve_table(const std::string& path, const std::vector<CurveRow>& rows) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  write_curve_table(os, rows);
  if (!os) throw IoError("short write on " + path);
}

std::vector<CurveRow> read_curve_table(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path);
  std::string line;
  if (!std::getline(is, line) || line.rfind("frame\tmetric", 0) != 0) throw IoError(path + ": not a curve table");
  std::vector<CurveRow> rows;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    CurveRow r;
    if (!(ls >> r.frame >> r.metric >> r.mean >> r.stderr_ >> r.config)) {
      throw IoError(path + ":" + std::to_string(lineno) + ": malformed row");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace motion6d::track
