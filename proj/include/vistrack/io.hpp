#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vistrack/affinity.hpp"
#include "vistrack/embedding.hpp"
#include "vistrack/mask.hpp"
#include "vistrack/metrics.hpp"
#include "vistrack/simulator.hpp"
#include "vistrack/tracker.hpp"

namespace vistrack {

/// Parse or validation failure tied to an input file, optionally to a line.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& message, int line = -1)
      : std::runtime_error(message), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

namespace io {

using nlohmann::json;

/// Doubles are serialized with 17 significant digits so emitted files are
/// bit-faithful goldens.
inline std::string dtos(double v) {
  if (!std::isfinite(v)) throw IoError("cannot serialize non-finite number");
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void append_rle(std::string& out, const BinaryMask& m) {
  out += "{\"w\":" + std::to_string(m.width) + ",\"h\":" + std::to_string(m.height) + ",\"runs\":[";
  for (std::size_t i = 0; i < m.runs.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(m.runs[i]);
  }
  out += "]}";
}

inline void append_doubles(std::string& out, const double* v, std::size_t n) {
  out += '[';
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ',';
    out += dtos(v[i]);
  }
  out += ']';
}

/// Write-then-rename so partially written outputs never replace good ones.
inline void atomic_write(const std::string& path, const std::string& content) {
  const std::filesystem::path target(path);
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + tmp.string());
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw IoError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

inline BinaryMask parse_rle(const json& j, int line) {
  if (!j.is_object() || !j.contains("w") || !j.contains("h") || !j.contains("runs"))
    throw IoError("mask must be an object with w, h, runs", line);
  BinaryMask m;
  m.width = j.at("w").get<int>();
  m.height = j.at("h").get<int>();
  for (const auto& r : j.at("runs")) {
    const auto v = r.get<std::int64_t>();
    if (v < 0) throw IoError("negative run length", line);
    m.runs.push_back(static_cast<std::uint32_t>(v));
  }
  try {
    detail::check_canonical(m);
  } catch (const std::exception& e) {
    throw IoError(std::string("invalid mask: ") + e.what(), line);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Detection stream

struct DetectionRecord {
  int frame = 0;
  BinaryMask mask;
  double score = 1.0;
  std::optional<Eigen::VectorXd> embedding;
  std::optional<std::string> feature_maps;  // key into the maps file
};

inline std::string detection_line(const DetectionRecord& r) {
  std::string out = "{\"frame\":" + std::to_string(r.frame) + ",\"mask\":";
  append_rle(out, r.mask);
  out += ",\"score\":" + dtos(r.score);
  if (r.embedding) {
    out += ",\"embedding\":";
    append_doubles(out, r.embedding->data(), static_cast<std::size_t>(r.embedding->size()));
  } else {
    out += ",\"feature_maps\":\"" + *r.feature_maps + "\"";
  }
  out += "}";
  return out;
}

template <typename Fn>
inline void for_each_jsonl(const std::string& path, Fn&& fn) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open: " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      throw IoError(std::string("malformed JSON: ") + e.what(), line_no);
    }
    fn(j, line_no);
  }
}

inline std::vector<DetectionRecord> read_detections(const std::string& path) {
  std::vector<DetectionRecord> out;
  for_each_jsonl(path, [&](const json& j, int line) {
    try {
      DetectionRecord r;
      r.frame = j.at("frame").get<int>();
      if (r.frame < 0) throw IoError("frame must be non-negative", line);
      r.mask = parse_rle(j.at("mask"), line);
      r.score = j.value("score", 1.0);
      const bool has_emb = j.contains("embedding");
      const bool has_maps = j.contains("feature_maps");
      if (has_emb == has_maps)
        throw IoError("record needs exactly one of embedding / feature_maps", line);
      if (has_emb) {
        const auto& arr = j.at("embedding");
        Eigen::VectorXd v(arr.size());
        for (std::size_t k = 0; k < arr.size(); ++k) v(static_cast<int>(k)) = arr[k].get<double>();
        r.embedding = std::move(v);
      } else {
        r.feature_maps = j.at("feature_maps").get<std::string>();
      }
      out.push_back(std::move(r));
    } catch (const IoError&) {
      throw;
    } catch (const std::exception& e) {
      throw IoError(std::string("bad detection record: ") + e.what(), line);
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Track stream (also used for ground-truth identity streams)

struct TrackRecord {
  int frame = 0;
  int track_id = 0;
  BinaryMask mask;
  double score = 1.0;
};

inline std::string track_line(const TrackRecord& r) {
  std::string out = "{\"frame\":" + std::to_string(r.frame) +
                    ",\"track_id\":" + std::to_string(r.track_id) + ",\"mask\":";
  append_rle(out, r.mask);
  out += ",\"score\":" + dtos(r.score) + "}";
  return out;
}

inline std::vector<TrackRecord> read_track_records(const std::string& path) {
  std::vector<TrackRecord> out;
  std::set<std::pair<int, int>> seen;
  for_each_jsonl(path, [&](const json& j, int line) {
    try {
      TrackRecord r;
      r.frame = j.at("frame").get<int>();
      r.track_id = j.at("track_id").get<int>();
      r.mask = parse_rle(j.at("mask"), line);
      r.score = j.value("score", 1.0);
      if (r.frame < 0) throw IoError("frame must be non-negative", line);
      if (!seen.insert({r.frame, r.track_id}).second)
        throw IoError("duplicate (frame, track_id)", line);
      out.push_back(std::move(r));
    } catch (const IoError&) {
      throw;
    } catch (const std::exception& e) {
      throw IoError(std::string("bad track record: ") + e.what(), line);
    }
  });
  return out;
}

inline LabeledSequence sequence_from_records(const std::vector<TrackRecord>& records,
                                             int n_frames) {
  LabeledSequence seq;
  seq.frames.resize(n_frames);
  for (const auto& r : records) {
    if (r.frame >= n_frames) continue;
    if (seq.width == 0) {
      seq.width = r.mask.width;
      seq.height = r.mask.height;
    }
    seq.frames[r.frame].emplace_back(r.track_id, r.mask);
  }
  return seq;
}

// ---------------------------------------------------------------------------
// Feature map stream

inline std::string stack_line(const std::string& key, const FeatureMapStack& stack) {
  std::string out = "{\"key\":\"" + key + "\",\"maps\":[";
  for (std::size_t m = 0; m < stack.maps.size(); ++m) {
    const FeatureMap& map = stack.maps[m];
    if (m) out += ',';
    out += "{\"channels\":" + std::to_string(map.channels) +
           ",\"height\":" + std::to_string(map.height) + ",\"width\":" + std::to_string(map.width) +
           ",\"stride\":" + dtos(map.stride) + ",\"values\":";
    append_doubles(out, map.values.data(), map.values.size());
    out += "}";
  }
  out += "]}";
  return out;
}

inline std::map<std::string, FeatureMapStack> read_stacks(const std::string& path) {
  std::map<std::string, FeatureMapStack> out;
  for_each_jsonl(path, [&](const json& j, int line) {
    try {
      const auto key = j.at("key").get<std::string>();
      FeatureMapStack stack;
      for (const auto& jm : j.at("maps")) {
        FeatureMap map;
        map.channels = jm.at("channels").get<int>();
        map.height = jm.at("height").get<int>();
        map.width = jm.at("width").get<int>();
        map.stride = jm.at("stride").get<double>();
        if (map.channels <= 0 || map.height <= 0 || map.width <= 0 || map.stride <= 0)
          throw IoError("feature map dimensions must be positive", line);
        const auto& vals = jm.at("values");
        const std::size_t expect =
            static_cast<std::size_t>(map.channels) * map.height * map.width;
        if (vals.size() != expect) throw IoError("feature map value count mismatch", line);
        map.values.reserve(expect);
        for (const auto& v : vals) map.values.push_back(v.get<double>());
        stack.maps.push_back(std::move(map));
      }
      out[key] = std::move(stack);
    } catch (const IoError&) {
      throw;
    } catch (const std::exception& e) {
      throw IoError(std::string("bad feature map record: ") + e.what(), line);
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Tracker configuration

inline std::string sampling_name(SamplingStrategy s) {
  return s == SamplingStrategy::CentroidMaxContour ? "centroid_max_contour" : "bbox_center";
}

inline std::string iou_name(IouMode m) {
  switch (m) {
    case IouMode::Mask: return "mask";
    case IouMode::Bbox: return "bbox";
    default: return "none";
  }
}

inline std::string config_json(const TrackerConfig& c) {
  std::string out = "{";
  out += "\"n_m\":" + std::to_string(c.max_instances);
  out += ",\"t_m\":" + std::to_string(c.max_pair_gap);
  out += ",\"tau\":" + std::to_string(c.max_coast_age);
  out += ",\"e\":" + std::to_string(c.embedding_length);
  out += ",\"gamma\":" + dtos(c.entry_exit_score);
  out += ",\"theta_emb\":" + dtos(c.feature_threshold);
  out += ",\"theta_iou\":" + dtos(c.iou_threshold);
  out += ",\"gate_threshold\":" + dtos(c.gate_threshold);
  out += ",\"fusion_depth\":" + std::to_string(c.fusion_depth);
  out += ",\"sampling_strategy\":\"" + sampling_name(c.sampling_strategy) + "\"";
  out += ",\"iou_mode\":\"" + iou_name(c.iou_mode) + "\"";
  out += ",\"history_cap\":" + std::to_string(c.history_cap);
  out += ",\"coast_output\":" + std::to_string(c.coast_output);
  out += ",\"position_weight\":" + dtos(c.noise.position_weight);
  out += ",\"velocity_weight\":" + dtos(c.noise.velocity_weight);
  out += "}\n";
  return out;
}

inline void config_range_error(const std::string& key) {
  throw IoError("config key out of range: " + key);
}

inline TrackerConfig parse_config(const json& j) {
  TrackerConfig c;
  c.max_instances = j.value("n_m", c.max_instances);
  c.max_pair_gap = j.value("t_m", c.max_pair_gap);
  c.max_coast_age = j.value("tau", c.max_coast_age);
  c.embedding_length = j.value("e", c.embedding_length);
  c.entry_exit_score = j.value("gamma", c.entry_exit_score);
  c.feature_threshold = j.value("theta_emb", c.feature_threshold);
  c.iou_threshold = j.value("theta_iou", c.iou_threshold);
  c.gate_threshold = j.value("gate_threshold", c.gate_threshold);
  c.fusion_depth = j.value("fusion_depth", c.fusion_depth);
  c.history_cap = j.value("history_cap", c.history_cap);
  c.coast_output = j.value("coast_output", c.coast_output);
  c.noise.position_weight = j.value("position_weight", c.noise.position_weight);
  c.noise.velocity_weight = j.value("velocity_weight", c.noise.velocity_weight);
  if (j.contains("sampling_strategy")) {
    const auto s = j.at("sampling_strategy").get<std::string>();
    if (s == "centroid_max_contour")
      c.sampling_strategy = SamplingStrategy::CentroidMaxContour;
    else if (s == "bbox_center")
      c.sampling_strategy = SamplingStrategy::BboxCenter;
    else
      config_range_error("sampling_strategy");
  }
  if (j.contains("iou_mode")) {
    const auto s = j.at("iou_mode").get<std::string>();
    if (s == "mask")
      c.iou_mode = IouMode::Mask;
    else if (s == "bbox")
      c.iou_mode = IouMode::Bbox;
    else if (s == "none")
      c.iou_mode = IouMode::None;
    else
      config_range_error("iou_mode");
  }
  if (c.max_instances < 1) config_range_error("n_m");
  if (c.max_pair_gap < 1) config_range_error("t_m");
  if (c.max_coast_age < 0) config_range_error("tau");
  if (c.embedding_length < 1) config_range_error("e");
  if (c.feature_threshold < 0 || c.feature_threshold > 1) config_range_error("theta_emb");
  if (c.iou_threshold < 0 || c.iou_threshold > 1) config_range_error("theta_iou");
  if (c.gate_threshold < 0) config_range_error("gate_threshold");
  if (c.fusion_depth < 1) config_range_error("fusion_depth");
  if (c.history_cap < 1) config_range_error("history_cap");
  if (c.coast_output < 0) config_range_error("coast_output");
  if (c.noise.position_weight <= 0) config_range_error("position_weight");
  if (c.noise.velocity_weight <= 0) config_range_error("velocity_weight");
  return c;
}

inline TrackerConfig read_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open: " + path);
  json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw IoError(std::string("malformed config: ") + e.what());
  }
  return parse_config(j);
}

// ---------------------------------------------------------------------------
// Reports

inline std::string metrics_json(const MetricsReport& r) {
  std::string out = "{";
  out += "\"hota\":" + dtos(r.hota);
  out += ",\"det_a\":" + dtos(r.det_a);
  out += ",\"ass_a\":" + dtos(r.ass_a);
  out += ",\"det_re\":" + dtos(r.det_re);
  out += ",\"det_pr\":" + dtos(r.det_pr);
  out += ",\"ass_re\":" + dtos(r.ass_re);
  out += ",\"ass_pr\":" + dtos(r.ass_pr);
  out += ",\"loc_a\":" + dtos(r.loc_a);
  out += ",\"ids\":" + std::to_string(r.ids);
  out += ",\"per_alpha\":[";
  for (std::size_t i = 0; i < r.per_alpha.size(); ++i) {
    const auto& a = r.per_alpha[i];
    if (i) out += ',';
    out += "{\"alpha\":" + dtos(a.alpha) + ",\"hota\":" + dtos(a.hota) +
           ",\"det_a\":" + dtos(a.det_a) + ",\"ass_a\":" + dtos(a.ass_a) +
           ",\"det_re\":" + dtos(a.det_re) + ",\"det_pr\":" + dtos(a.det_pr) +
           ",\"ass_re\":" + dtos(a.ass_re) + ",\"ass_pr\":" + dtos(a.ass_pr) +
           ",\"loc_a\":" + dtos(a.loc_a) + "}";
  }
  out += "]}\n";
  return out;
}

inline std::string loss_json(const LossReport& r, const std::optional<double>& combined) {
  std::string out = "{";
  out += "\"l_fw\":" + dtos(r.l_fw);
  out += ",\"l_rv\":" + dtos(r.l_rv);
  out += ",\"l_nm\":" + dtos(r.l_nm);
  out += ",\"l_match\":" + dtos(r.l_match);
  if (combined) out += ",\"combined\":" + dtos(*combined);
  out += "}\n";
  return out;
}

// ---------------------------------------------------------------------------
// Loss-oracle inputs: a frame pair of embedding matrices plus a ground-truth
// association.

struct FramePairFile {
  int embedding_length = 0;
  int max_instances = 0;
  EmbeddingMatrix prev;
  EmbeddingMatrix cur;
  // Alternative form: probabilities given directly instead of embeddings.
  std::optional<Eigen::MatrixXd> p_fw;
  std::optional<Eigen::MatrixXd> p_rv;
};

inline EmbeddingMatrix parse_embedding_columns(const json& arr, int e, int n_m,
                                               const char* what) {
  if (static_cast<int>(arr.size()) > n_m)
    throw IoError(std::string(what) + ": more columns than n_m");
  std::vector<Eigen::VectorXd> cols;
  for (const auto& jc : arr) {
    if (static_cast<int>(jc.size()) != e)
      throw IoError(std::string(what) + ": column length differs from e");
    Eigen::VectorXd v(e);
    for (int k = 0; k < e; ++k) v(k) = jc[static_cast<std::size_t>(k)].get<double>();
    cols.push_back(std::move(v));
  }
  return build_embedding_matrix(cols, e, n_m);
}

inline Eigen::MatrixXd parse_matrix(const json& arr, int rows, int cols, const char* what) {
  if (static_cast<int>(arr.size()) != rows)
    throw IoError(std::string(what) + ": unexpected row count");
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const auto& row = arr[static_cast<std::size_t>(i)];
    if (static_cast<int>(row.size()) != cols)
      throw IoError(std::string(what) + ": unexpected column count");
    for (int j = 0; j < cols; ++j) m(i, j) = row[static_cast<std::size_t>(j)].get<double>();
  }
  return m;
}

inline FramePairFile read_frame_pair(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open: " + path);
  json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw IoError(std::string("malformed frame pair file: ") + e.what());
  }
  FramePairFile out;
  out.max_instances = j.at("n_m").get<int>();
  if (out.max_instances < 1) config_range_error("n_m");
  const int n = out.max_instances;
  if (j.contains("p_fw") || j.contains("p_rv")) {
    if (!j.contains("p_fw") || !j.contains("p_rv"))
      throw IoError("probability form needs both p_fw and p_rv");
    out.p_fw = parse_matrix(j.at("p_fw"), n + 1, n, "p_fw");
    out.p_rv = parse_matrix(j.at("p_rv"), n, n + 1, "p_rv");
    return out;
  }
  out.embedding_length = j.at("e").get<int>();
  if (out.embedding_length < 1) config_range_error("e");
  out.prev = parse_embedding_columns(j.at("prev"), out.embedding_length, out.max_instances, "prev");
  out.cur = parse_embedding_columns(j.at("cur"), out.embedding_length, out.max_instances, "cur");
  return out;
}

inline GroundTruthAssociation read_association(const std::string& path, int max_instances) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open: " + path);
  json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw IoError(std::string("malformed association file: ") + e.what());
  }
  const int n_m = j.value("n_m", max_instances);
  if (n_m != max_instances) throw IoError("association n_m differs from frame pair n_m");
  std::vector<std::pair<int, int>> pairs;
  for (const auto& jp : j.at("pairs")) {
    if (jp.size() != 2) throw IoError("association pairs must be [i, j]");
    pairs.emplace_back(jp[0].get<int>(), jp[1].get<int>());
  }
  try {
    return make_ground_truth(n_m, pairs, j.at("n_prev").get<int>(), j.at("n_cur").get<int>());
  } catch (const std::exception& e) {
    throw IoError(std::string("invalid association: ") + e.what());
  }
}

}  // namespace io
}  // namespace vistrack
