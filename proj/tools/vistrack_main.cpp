// Command-line surface for the tracking pipeline:
//   simulate -> detection/GT streams, track -> identity tracks,
//   eval -> HOTA report, losses -> association loss report.

#include <CLI11.hpp>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "vistrack/io.hpp"
#include "vistrack/scenarios.hpp"

namespace {

using namespace vistrack;

AffinityScorer scorer_by_name(const std::string& name) {
  if (name == "cosine") return cosine_scorer;
  if (name == "neg_sq_euclidean") return neg_squared_euclidean_scorer;
  throw IoError("unknown scorer: " + name);
}

struct SimulateArgs {
  std::string preset = "crossings";
  std::uint64_t seed = 0;
  int frames = -1;
  int identities = -1;
  double noise = 0.0;
  double drop = 0.0;
  std::string out_gt, out_det, out_maps;
};

void run_simulate(const SimulateArgs& a) {
  Scenario scenario;
  if (a.preset == "basic" || a.preset == "crossings") {
    const int frames = a.frames > 0 ? a.frames : 100;
    const int ids = a.identities > 0 ? a.identities : 10;
    scenario = a.preset == "basic"
                   ? generate(basic_scenario(a.seed, ids, frames, a.noise, a.drop))
                   : generate(crossing_scenario(a.seed, a.noise, a.drop, frames));
  } else if (a.preset == "coincidence") {
    CoincidenceParams p;
    p.seed = a.seed;
    p.noise = a.noise;
    if (a.frames > 0) p.n_frames = a.frames;
    scenario = center_coincidence_scenario(p);
  } else if (a.preset == "deformation") {
    scenario = generate(deformation_scenario(a.seed, a.frames > 0 ? a.frames : 60));
  } else {
    throw IoError("unknown preset: " + a.preset);
  }
  if (scenario.has_stacks && a.out_maps.empty())
    throw IoError("preset emits feature maps; --out-maps is required");

  std::string gt_text;
  for (std::size_t t = 0; t < scenario.gt.frames.size(); ++t)
    for (const auto& [id, mask] : scenario.gt.frames[t])
      gt_text += io::track_line({static_cast<int>(t), id, mask, 1.0}) + "\n";
  io::atomic_write(a.out_gt, gt_text);

  std::string det_text;
  for (std::size_t t = 0; t < scenario.detections.size(); ++t) {
    for (const auto& det : scenario.detections[t]) {
      io::DetectionRecord r;
      r.frame = static_cast<int>(t);
      r.mask = det.mask;
      r.score = det.confidence;
      if (scenario.has_stacks)
        r.feature_maps = "f" + std::to_string(t);
      else
        r.embedding = det.embedding;
      det_text += io::detection_line(r) + "\n";
    }
  }
  io::atomic_write(a.out_det, det_text);

  if (scenario.has_stacks) {
    std::string maps_text;
    for (std::size_t t = 0; t < scenario.stacks.size(); ++t)
      maps_text += io::stack_line("f" + std::to_string(t), scenario.stacks[t]) + "\n";
    io::atomic_write(a.out_maps, maps_text);
  }
}

struct TrackArgs {
  std::string in, maps, config, out;
  std::string sampling, iou, scorer = "cosine";
  bool no_kalman = false;
  bool lenient = false;
};

void run_track(const TrackArgs& a) {
  TrackerConfig cfg = a.config.empty() ? TrackerConfig{} : io::read_config(a.config);
  if (!a.sampling.empty()) {
    if (a.sampling == "centroid_max_contour")
      cfg.sampling_strategy = SamplingStrategy::CentroidMaxContour;
    else if (a.sampling == "bbox_center")
      cfg.sampling_strategy = SamplingStrategy::BboxCenter;
    else
      throw IoError("unknown sampling strategy: " + a.sampling);
  }
  if (!a.iou.empty()) {
    if (a.iou == "mask")
      cfg.iou_mode = IouMode::Mask;
    else if (a.iou == "bbox")
      cfg.iou_mode = IouMode::Bbox;
    else if (a.iou == "none")
      cfg.iou_mode = IouMode::None;
    else
      throw IoError("unknown iou mode: " + a.iou);
  }
  if (a.no_kalman) cfg.gate_threshold = std::numeric_limits<double>::infinity();
  cfg.overflow = a.lenient ? OverflowMode::Lenient : OverflowMode::Strict;

  const auto records = io::read_detections(a.in);
  std::map<std::string, FeatureMapStack> stacks;
  if (!a.maps.empty()) stacks = io::read_stacks(a.maps);

  std::map<int, std::vector<Detection>> by_frame;
  int max_frame = -1;
  for (const auto& r : records) {
    Eigen::VectorXd embedding;
    if (r.embedding) {
      embedding = *r.embedding;
    } else {
      const auto it = stacks.find(*r.feature_maps);
      if (it == stacks.end())
        throw IoError("feature map key not found (is --maps set?): " + *r.feature_maps);
      embedding = sample_embedding(it->second, sampling_point(r.mask, cfg.sampling_strategy),
                                   cfg.embedding_length);
    }
    if (embedding.size() != cfg.embedding_length)
      throw IoError("embedding length differs from config e");
    by_frame[r.frame].push_back(make_detection(r.frame, r.mask, r.score, std::move(embedding)));
    max_frame = std::max(max_frame, r.frame);
  }

  Tracker tracker(cfg, scorer_by_name(a.scorer));
  std::string out_text;
  const int first = by_frame.empty() ? 0 : by_frame.begin()->first;
  static const std::vector<Detection> kNoDetections;
  for (int t = first; t <= max_frame; ++t) {
    const auto it = by_frame.find(t);
    const auto& dets = it == by_frame.end() ? kNoDetections : it->second;
    const FrameReport report = tracker.step(t, dets);
    for (const auto& o : report.outputs)
      out_text += io::track_line({o.frame_index, o.track_id, o.mask, o.score}) + "\n";
  }
  io::atomic_write(a.out, out_text);
}

struct EvalArgs {
  std::string gt, pred, out;
};

void run_eval(const EvalArgs& a) {
  const auto gt_records = io::read_track_records(a.gt);
  const auto pred_records = io::read_track_records(a.pred);
  int n_frames = 0;
  for (const auto& r : gt_records) n_frames = std::max(n_frames, r.frame + 1);
  for (const auto& r : pred_records) n_frames = std::max(n_frames, r.frame + 1);
  LabeledSequence gt = io::sequence_from_records(gt_records, n_frames);
  LabeledSequence pred = io::sequence_from_records(pred_records, n_frames);
  if (pred.width == 0) {
    pred.width = gt.width;
    pred.height = gt.height;
  }
  if (gt.width == 0) {
    gt.width = pred.width;
    gt.height = pred.height;
  }
  io::atomic_write(a.out, io::metrics_json(evaluate(gt, pred)));
}

struct LossArgs {
  std::string pair, assoc, config, out;
  std::string scorer = "cosine";
  double s_i = 0.0, s_j = 0.0, detseg_prev = 0.0, detseg_cur = 0.0;
  bool with_combined = false;
};

void run_losses(const LossArgs& a) {
  const TrackerConfig cfg = a.config.empty() ? TrackerConfig{} : io::read_config(a.config);
  const auto pair = io::read_frame_pair(a.pair);
  const auto gt = io::read_association(a.assoc, pair.max_instances);
  Eigen::MatrixXd p_fw, p_rv;
  if (pair.p_fw) {
    p_fw = *pair.p_fw;
    p_rv = *pair.p_rv;
  } else {
    const AffinityResult aff =
        compute_affinity(pair.cur, pair.prev, cfg.entry_exit_score, scorer_by_name(a.scorer));
    p_fw = aff.p_fw;
    p_rv = aff.p_rv;
  }
  const double l_fw = forward_loss(p_fw, gt.g_fw);
  const double l_rv = reverse_loss(p_rv, gt.g_rv);
  const double l_nm = nonmax_loss(p_fw, p_rv, gt.g);
  const LossReport report = match_loss(l_fw, l_rv, l_nm);
  std::optional<double> combined;
  if (a.with_combined)
    combined = combined_loss(
        CombinedLossInput{a.detseg_prev, a.detseg_cur, report.l_match, a.s_i, a.s_j});
  io::atomic_write(a.out, io::loss_json(report, combined));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"video instance tracking pipeline"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "generate a synthetic scenario");
  c_sim->add_option("--preset", sim.preset, "basic | crossings | coincidence | deformation");
  c_sim->add_option("--seed", sim.seed, "rng seed");
  c_sim->add_option("--frames", sim.frames, "frame count override");
  c_sim->add_option("--identities", sim.identities, "identity count override");
  c_sim->add_option("--noise", sim.noise, "embedding noise sigma");
  c_sim->add_option("--drop", sim.drop, "detection drop probability");
  c_sim->add_option("--out-gt", sim.out_gt, "ground-truth JSONL")->required();
  c_sim->add_option("--out-det", sim.out_det, "detections JSONL")->required();
  c_sim->add_option("--out-maps", sim.out_maps, "feature map JSONL");

  TrackArgs trk;
  auto* c_trk = app.add_subcommand("track", "associate detections into tracks");
  c_trk->add_option("--in", trk.in, "detections JSONL")->required();
  c_trk->add_option("--maps", trk.maps, "feature map JSONL");
  c_trk->add_option("--config", trk.config, "tracker config JSON");
  c_trk->add_option("--out", trk.out, "tracks JSONL")->required();
  c_trk->add_option("--sampling", trk.sampling, "centroid_max_contour | bbox_center");
  c_trk->add_option("--iou", trk.iou, "mask | bbox | none");
  c_trk->add_option("--scorer", trk.scorer, "cosine | neg_sq_euclidean");
  c_trk->add_flag("--no-kalman", trk.no_kalman, "disable motion gating");
  auto* lenient = c_trk->add_flag("--lenient", trk.lenient, "truncate crowded frames");
  c_trk->add_flag("--strict", "fail on crowded frames (default)")->excludes(lenient);

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "HOTA-family evaluation");
  c_ev->add_option("--gt", ev.gt, "ground-truth JSONL")->required();
  c_ev->add_option("--pred", ev.pred, "predicted tracks JSONL")->required();
  c_ev->add_option("--out", ev.out, "report JSON")->required();

  LossArgs ls;
  auto* c_ls = app.add_subcommand("losses", "association losses on a frame pair");
  c_ls->add_option("--pair", ls.pair, "frame pair JSON")->required();
  c_ls->add_option("--gt-assoc", ls.assoc, "ground-truth association JSON")->required();
  c_ls->add_option("--config", ls.config, "tracker config JSON (gamma)");
  c_ls->add_option("--scorer", ls.scorer, "cosine | neg_sq_euclidean");
  c_ls->add_option("--out", ls.out, "loss report JSON")->required();
  c_ls->add_option("--s-i", ls.s_i, "detection/segmentation weight parameter");
  c_ls->add_option("--s-j", ls.s_j, "matching weight parameter");
  c_ls->add_option("--detseg-prev", ls.detseg_prev, "earlier frame det-seg loss");
  c_ls->add_option("--detseg-cur", ls.detseg_cur, "current frame det-seg loss");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*c_sim) run_simulate(sim);
    if (*c_trk) run_track(trk);
    if (*c_ev) run_eval(ev);
    if (*c_ls) {
      ls.with_combined = c_ls->count("--s-i") || c_ls->count("--s-j") ||
                         c_ls->count("--detseg-prev") || c_ls->count("--detseg-cur");
      run_losses(ls);
    }
  } catch (const vistrack::IoError& e) {
    std::cerr << "{\"error\":\"" << e.what() << "\"";
    if (e.line() >= 0) std::cerr << ",\"line\":" << e.line();
    std::cerr << "}\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "{\"error\":\"" << e.what() << "\"}\n";
    return 1;
  }
  return 0;
}
