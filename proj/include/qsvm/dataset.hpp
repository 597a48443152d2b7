#pragma once

// Text formats for skeleton captures, window annotations and feature files.
//
// Capture: one frame per line, 60 reals (x y z for joints 1..20), separated
// by whitespace and/or commas. Lines starting with '#' are comments.
//
// Annotation: one window per line, "start_frame end_frame label", 0-based
// inclusive frame indices, label 1 or 2.
//
// Features: one sample per line, "label f1 ... f22"; label 0 marks an
// unlabeled window.

#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "qsvm/error.hpp"
#include "qsvm/skeleton.hpp"
#include "qsvm/strings.hpp"
#include "qsvm/svm.hpp"

namespace qsvm {

struct Annotation {
  std::size_t start_frame = 0;
  std::size_t end_frame = 0;  // inclusive
  std::optional<int> label;
};

// External class labels {1, 2} map to SVM labels {+1, -1}.
inline int label_to_svm(int label) {
  if (label == 1) return +1;
  if (label == 2) return -1;
  throw InvalidArgumentError("class label " + std::to_string(label) + " is not 1 or 2");
}

inline int svm_to_label(int y) { return y > 0 ? 1 : 2; }

namespace detail {

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  return in;
}

inline bool parse_label(std::string_view tok, int& label) {
  double v;
  if (!parse_double(tok, v) || (v != 1.0 && v != 2.0)) return false;
  label = static_cast<int>(v);
  return true;
}

inline bool parse_index(std::string_view tok, std::size_t& out) {
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return res.ec == std::errc{} && res.ptr == tok.data() + tok.size();
}

}  // namespace detail

inline std::vector<SkeletonFrame> read_capture(std::istream& in, const std::string& source = "<capture>") {
  std::vector<SkeletonFrame> frames;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_skippable(line)) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 3 * kJointCount)
      throw ParseError(source, lineno,
                       "expected 60 fields, found " + std::to_string(fields.size()));
    SkeletonFrame f;
    f.frame_index = frames.size();
    for (std::size_t j = 0; j < kJointCount; ++j) {
      double xyz[3];
      for (int k = 0; k < 3; ++k) {
        const auto tok = fields[3 * j + k];
        if (!parse_double(tok, xyz[k]) || !std::isfinite(xyz[k]))
          throw ParseError(source, lineno, "bad coordinate '" + std::string(tok) + "'");
      }
      f.positions[j] = {xyz[0], xyz[1], xyz[2]};
    }
    frames.push_back(f);
  }
  return frames;
}

inline std::vector<SkeletonFrame> read_capture_file(const std::string& path) {
  auto in = detail::open_input(path);
  return read_capture(in, path);
}

inline void write_capture(std::ostream& os, const std::vector<SkeletonFrame>& frames) {
  os << "# skeleton capture: 20 joints x (x y z) per line\n";
  for (const auto& f : frames) {
    for (std::size_t j = 0; j < kJointCount; ++j) {
      const auto& p = f.positions[j];
      os << (j ? " " : "") << format_double(p.x) << ' ' << format_double(p.y) << ' ' << format_double(p.z);
    }
    os << '\n';
  }
}

inline std::vector<Annotation> read_annotations(std::istream& in, const std::string& source = "<annotations>") {
  std::vector<Annotation> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_skippable(line)) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 3)
      throw ParseError(source, lineno, "expected 'start_frame end_frame label'");
    Annotation a;
    int label = 0;
    if (!detail::parse_index(fields[0], a.start_frame) || !detail::parse_index(fields[1], a.end_frame))
      throw ParseError(source, lineno, "frame indices must be non-negative integers");
    if (!detail::parse_label(fields[2], label))
      throw ParseError(source, lineno, "label must be 1 or 2");
    if (a.end_frame < a.start_frame) throw ParseError(source, lineno, "end_frame precedes start_frame");
    a.label = label;
    out.push_back(a);
  }
  return out;
}

inline std::vector<Annotation> read_annotation_file(const std::string& path) {
  auto in = detail::open_input(path);
  return read_annotations(in, path);
}

inline void write_annotations(std::ostream& os, const std::vector<Annotation>& anns) {
  os << "# start_frame end_frame label\n";
  for (const auto& a : anns) os << a.start_frame << ' ' << a.end_frame << ' ' << a.label.value_or(0) << '\n';
}

// Fixed-length windows for unannotated streams; the tail shorter than
// `length` is dropped.
inline std::vector<Annotation> sliding_windows(std::size_t frame_count, std::size_t length, std::size_t stride) {
  if (length < 2) throw InvalidArgumentError("sliding window length must be >= 2");
  if (stride < 1) throw InvalidArgumentError("sliding window stride must be >= 1");
  std::vector<Annotation> out;
  for (std::size_t s = 0; s + length <= frame_count; s += stride) out.push_back({s, s + length - 1, std::nullopt});
  return out;
}

inline std::vector<FeatureVector> extract_features(const std::vector<SkeletonFrame>& frames,
                                                   const std::vector<Annotation>& annotations,
                                                   const std::string& source_id = "capture") {
  std::vector<FeatureVector> out;
  out.reserve(annotations.size());
  for (std::size_t k = 0; k < annotations.size(); ++k) {
    const auto& a = annotations[k];
    if (a.end_frame >= frames.size())
      throw OutOfRangeError("annotation " + std::to_string(k + 1) + " spans frames " +
                            std::to_string(a.start_frame) + ".." + std::to_string(a.end_frame) +
                            " but the capture has " + std::to_string(frames.size()) + " frames");
    ActionWindow w;
    w.frames.assign(frames.begin() + static_cast<std::ptrdiff_t>(a.start_frame),
                    frames.begin() + static_cast<std::ptrdiff_t>(a.end_frame) + 1);
    w.label = a.label;
    w.source_id = source_id + "[" + std::to_string(a.start_frame) + ".." + std::to_string(a.end_frame) + "]";
    out.push_back(window_features(w));
  }
  return out;
}

inline std::vector<FeatureVector> load_dataset(const std::string& capture_path, const std::string& annotation_path) {
  const auto frames = read_capture_file(capture_path);
  const auto anns = read_annotation_file(annotation_path);
  return extract_features(frames, anns, capture_path);
}

inline void write_features(std::ostream& os, const std::vector<FeatureVector>& features) {
  os << "# label then 22 joint-angle variances (rad^2)\n";
  for (const auto& f : features) {
    os << f.label.value_or(0);
    for (double v : f.values) os << ' ' << format_double(v);
    os << '\n';
  }
}

inline std::vector<FeatureVector> read_features(std::istream& in, const std::string& source = "<features>") {
  std::vector<FeatureVector> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_skippable(line)) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 1 + kAngleCount)
      throw ParseError(source, lineno, "expected label and 22 features, found " +
                                           std::to_string(fields.size()) + " fields");
    FeatureVector f;
    int label = 0;
    if (fields[0] != "0") {
      if (!detail::parse_label(fields[0], label))
        throw ParseError(source, lineno, "label must be 1, 2 or 0 (unlabeled)");
      f.label = label;
    }
    for (std::size_t i = 0; i < kAngleCount; ++i) {
      if (!parse_double(fields[i + 1], f.values[i]) || !std::isfinite(f.values[i]) || f.values[i] < 0.0)
        throw ParseError(source, lineno, "bad feature value '" + std::string(fields[i + 1]) + "'");
    }
    out.push_back(f);
  }
  return out;
}

inline std::vector<FeatureVector> read_feature_file(const std::string& path) {
  auto in = detail::open_input(path);
  return read_features(in, path);
}

inline std::vector<LabeledSample> to_samples(const std::vector<FeatureVector>& features) {
  std::vector<LabeledSample> out;
  out.reserve(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (!features[i].label) throw InvalidArgumentError("feature vector " + std::to_string(i) + " is unlabeled");
    out.push_back({std::vector<double>(features[i].values.begin(), features[i].values.end()),
                   label_to_svm(*features[i].label)});
  }
  return out;
}

}  // namespace qsvm
