#pragma once

// End-to-end experiment: load or synthesize data, split per class, tune
// (C, sigma) by grid search and/or QGA, retrain on the full training set,
// score the held-out test set, and write a report.
//
// Output directory layout:
//   report.json             deterministic report body (no timings)
//   timing.json             wall-clock figures
//   trace_<method>.txt      one line per fitness evaluation
//   generations_qga.txt     best-so-far per QGA generation
//   model_<method>.txt      final SVM in the qsvm-model text format

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qsvm/dataset.hpp"
#include "qsvm/error.hpp"
#include "qsvm/qga.hpp"
#include "qsvm/rng.hpp"
#include "qsvm/svm.hpp"
#include "qsvm/synth.hpp"
#include "qsvm/tuning.hpp"

namespace qsvm {

using Json = nlohmann::json;

inline constexpr int kReportSchemaVersion = 1;

struct ConfusionMatrix {
  // counts[true][predicted], index 0 = class 1, index 1 = class 2.
  std::array<std::array<std::size_t, 2>, 2> counts{};

  std::size_t total() const { return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1]; }
  std::size_t row_total(int cls) const { return counts[cls][0] + counts[cls][1]; }
  double class_accuracy(int cls) const {
    const auto n = row_total(cls);
    return n == 0 ? 0.0 : static_cast<double>(counts[cls][cls]) / static_cast<double>(n);
  }
  double accuracy() const {
    const auto n = total();
    return n == 0 ? 0.0 : static_cast<double>(counts[0][0] + counts[1][1]) / static_cast<double>(n);
  }
};

inline ConfusionMatrix evaluate(const SvmModel& model, std::span<const LabeledSample> test) {
  if (test.empty()) throw EmptyDataError("evaluate: empty test set");
  ConfusionMatrix cm;
  for (const auto& s : test) {
    const int truth = s.label > 0 ? 0 : 1;
    const int pred = predict(model, s.features) > 0 ? 0 : 1;
    ++cm.counts[truth][pred];
  }
  return cm;
}

struct SplitResult {
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> test;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
};

// Stratified split: per class (1 then 2), a seeded shuffle picks the training
// members. Both outputs keep the input order.
inline SplitResult split(std::span<const LabeledSample> samples, std::span<const int> train_per_class,
                         std::uint64_t seed) {
  if (train_per_class.size() != 2) throw InvalidArgumentError("split: need train counts for classes 1 and 2");
  auto by = detail::indices_by_class(samples);
  std::vector<bool> in_train(samples.size(), false);
  for (std::size_t c = 0; c < 2; ++c) {
    const int want = train_per_class[c];
    if (want < 0 || static_cast<std::size_t>(want) > by[c].size())
      throw InvalidArgumentError("split: class " + std::to_string(c + 1) + " has " +
                                 std::to_string(by[c].size()) + " samples, cannot take " +
                                 std::to_string(want) + " for training");
    auto rng = make_rng(seed, {0x73706c6974ULL, c});
    shuffle(by[c], rng);
    for (int k = 0; k < want; ++k) in_train[by[c][static_cast<std::size_t>(k)]] = true;
  }
  SplitResult out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (in_train[i]) {
      out.train.push_back(samples[i]);
      out.train_indices.push_back(i);
    } else {
      out.test.push_back(samples[i]);
      out.test_indices.push_back(i);
    }
  }
  if (out.test.empty()) throw InvalidArgumentError("split: training counts leave an empty test set");
  return out;
}

// ---------------------------------------------------------------------------

struct ExperimentConfig {
  // Data source: a feature file, a capture + annotation pair, or the generator.
  std::string feature_path;
  std::string capture_path;
  std::string annotation_path;
  std::optional<SynthSpec> synthetic;

  std::vector<int> train_per_class{70, 90};
  std::vector<TuningMethod> methods{TuningMethod::Grid, TuningMethod::Qga};
  TuningProtocol protocol;
  QgaConfig qga;
  ParamGrid grid = ParamGrid::powers_of_two();
  SearchSpace search_space = default_search_space();
  std::string output_dir;
  std::uint64_t seed = 1;
  unsigned threads = 1;

  // Sub-seeds are derived from the master seed so that one number pins the run.
  std::uint64_t synth_seed() const { return derive_seed(seed, {1}); }
  std::uint64_t split_seed() const { return derive_seed(seed, {2}); }
  std::uint64_t protocol_seed() const { return derive_seed(seed, {3}); }
  std::uint64_t qga_seed() const { return derive_seed(seed, {4}); }

  static ExperimentConfig synthetic_default() {
    ExperimentConfig c;
    c.synthetic = SynthSpec{};
    return c;
  }
};

struct MethodOutcome {
  TuningResult tuning;
  SvmModel model;
  ConfusionMatrix confusion;
};

struct ExperimentReport {
  std::string data_source;
  std::array<std::size_t, 2> class_counts{};
  std::array<std::size_t, 2> train_counts{};
  std::array<std::size_t, 2> test_counts{};
  std::size_t feature_dimension = 0;
  std::vector<MethodOutcome> outcomes;
  Json config_echo;
  Json seeds;

  const MethodOutcome* find(TuningMethod m) const {
    for (const auto& o : outcomes)
      if (o.tuning.method == m) return &o;
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// Config (de)serialization. Keys mirror the ExperimentConfig field names.

namespace detail {

inline TuningMethod parse_method(const std::string& s) {
  if (s == "grid") return TuningMethod::Grid;
  if (s == "qga") return TuningMethod::Qga;
  throw InvalidArgumentError("unknown tuning method '" + s + "' (expected grid or qga)");
}

inline FitnessMode parse_fitness_mode(const std::string& s) {
  if (s == "cv" || s == "kfold_cv") return FitnessMode::KFoldCv;
  if (s == "holdout") return FitnessMode::Holdout;
  if (s == "train" || s == "train_accuracy") return FitnessMode::TrainAccuracy;
  throw InvalidArgumentError("unknown fitness mode '" + s + "' (expected cv, holdout or train)");
}

inline void reject_unknown(const Json& obj, std::initializer_list<const char*> known, const std::string& where) {
  if (!obj.is_object()) throw InvalidArgumentError(where + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw InvalidArgumentError("unknown key '" + it.key() + "' in " + where);
  }
}

template <typename T>
void read_if(const Json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace detail

inline Json synth_to_json(const SynthSpec& s) {
  return Json{{"windows_per_class", s.windows_per_class},
              {"frames_per_window", s.frames_per_window},
              {"rest_frames", s.rest_frames},
              {"class1_left_amplitude", s.class1_left_amplitude},
              {"class1_right_amplitude", s.class1_right_amplitude},
              {"class2_left_amplitude", s.class2_left_amplitude},
              {"class2_right_amplitude", s.class2_right_amplitude},
              {"amplitude_jitter", s.amplitude_jitter},
              {"position_noise", s.position_noise}};
}

inline SynthSpec synth_from_json(const Json& j) {
  detail::reject_unknown(j,
                         {"windows_per_class", "frames_per_window", "rest_frames", "class1_left_amplitude",
                          "class1_right_amplitude", "class2_left_amplitude", "class2_right_amplitude",
                          "amplitude_jitter", "position_noise"},
                         "synthetic");
  SynthSpec s;
  detail::read_if(j, "windows_per_class", s.windows_per_class);
  detail::read_if(j, "frames_per_window", s.frames_per_window);
  detail::read_if(j, "rest_frames", s.rest_frames);
  detail::read_if(j, "class1_left_amplitude", s.class1_left_amplitude);
  detail::read_if(j, "class1_right_amplitude", s.class1_right_amplitude);
  detail::read_if(j, "class2_left_amplitude", s.class2_left_amplitude);
  detail::read_if(j, "class2_right_amplitude", s.class2_right_amplitude);
  detail::read_if(j, "amplitude_jitter", s.amplitude_jitter);
  detail::read_if(j, "position_noise", s.position_noise);
  s.validate();
  return s;
}

// The echo leaves out output_dir and threads: neither affects results.
inline Json config_to_json(const ExperimentConfig& c) {
  Json j;
  if (!c.feature_path.empty()) j["feature_path"] = c.feature_path;
  if (!c.capture_path.empty()) j["capture_path"] = c.capture_path;
  if (!c.annotation_path.empty()) j["annotation_path"] = c.annotation_path;
  if (c.synthetic) j["synthetic"] = synth_to_json(*c.synthetic);
  j["train_per_class"] = c.train_per_class;
  Json methods = Json::array();
  for (auto m : c.methods) methods.push_back(tuning_method_name(m));
  j["methods"] = methods;
  j["protocol"] = {{"mode", fitness_mode_name(c.protocol.mode)},
                   {"folds", c.protocol.folds},
                   {"holdout_fraction", c.protocol.holdout_fraction},
                   {"svm_tolerance", c.protocol.svm_tolerance},
                   {"svm_max_passes", c.protocol.svm_max_passes}};
  j["qga"] = {{"population_size", c.qga.population_size},
              {"qubit_length", c.qga.qubit_length},
              {"max_generations", c.qga.max_generations},
              {"delta_theta", c.qga.delta_theta},
              {"catastrophe_patience", c.qga.catastrophe_patience},
              {"convergence_epsilon", c.qga.convergence_epsilon}};
  j["grid"] = {{"c_values", c.grid.c_values}, {"sigma_values", c.grid.sigma_values}};
  Json dims = Json::array();
  for (const auto& d : c.search_space.dims)
    dims.push_back({{"name", d.name}, {"low", d.low}, {"high", d.high}, {"bits", d.bits}});
  j["search_space"] = dims;
  j["seed"] = c.seed;
  return j;
}

inline ExperimentConfig config_from_json(const Json& j) {
  detail::reject_unknown(j,
                         {"feature_path", "capture_path", "annotation_path", "synthetic", "train_per_class",
                          "methods", "protocol", "qga", "grid", "search_space", "output_dir", "seed", "threads"},
                         "config");
  ExperimentConfig c;
  detail::read_if(j, "feature_path", c.feature_path);
  detail::read_if(j, "capture_path", c.capture_path);
  detail::read_if(j, "annotation_path", c.annotation_path);
  if (j.contains("synthetic")) c.synthetic = synth_from_json(j.at("synthetic"));
  detail::read_if(j, "train_per_class", c.train_per_class);
  if (j.contains("methods")) {
    c.methods.clear();
    for (const auto& m : j.at("methods")) c.methods.push_back(detail::parse_method(m.get<std::string>()));
  }
  if (j.contains("protocol")) {
    const auto& p = j.at("protocol");
    detail::reject_unknown(p, {"mode", "folds", "holdout_fraction", "svm_tolerance", "svm_max_passes"},
                           "protocol");
    if (p.contains("mode")) c.protocol.mode = detail::parse_fitness_mode(p.at("mode").get<std::string>());
    detail::read_if(p, "folds", c.protocol.folds);
    detail::read_if(p, "holdout_fraction", c.protocol.holdout_fraction);
    detail::read_if(p, "svm_tolerance", c.protocol.svm_tolerance);
    detail::read_if(p, "svm_max_passes", c.protocol.svm_max_passes);
  }
  if (j.contains("qga")) {
    const auto& q = j.at("qga");
    detail::reject_unknown(q,
                           {"population_size", "qubit_length", "max_generations", "delta_theta",
                            "catastrophe_patience", "convergence_epsilon"},
                           "qga");
    detail::read_if(q, "population_size", c.qga.population_size);
    detail::read_if(q, "qubit_length", c.qga.qubit_length);
    detail::read_if(q, "max_generations", c.qga.max_generations);
    detail::read_if(q, "delta_theta", c.qga.delta_theta);
    detail::read_if(q, "catastrophe_patience", c.qga.catastrophe_patience);
    detail::read_if(q, "convergence_epsilon", c.qga.convergence_epsilon);
  }
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    detail::reject_unknown(g, {"c_values", "sigma_values"}, "grid");
    detail::read_if(g, "c_values", c.grid.c_values);
    detail::read_if(g, "sigma_values", c.grid.sigma_values);
  }
  if (j.contains("search_space")) {
    c.search_space.dims.clear();
    for (const auto& d : j.at("search_space")) {
      detail::reject_unknown(d, {"name", "low", "high", "bits"}, "search_space entry");
      c.search_space.dims.push_back(
          {d.at("name").get<std::string>(), d.at("low").get<double>(), d.at("high").get<double>(),
           d.value("bits", 30)});
    }
  }
  detail::read_if(j, "output_dir", c.output_dir);
  detail::read_if(j, "seed", c.seed);
  detail::read_if(j, "threads", c.threads);
  return c;
}

inline ExperimentConfig read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path + "'");
  Json j;
  try {
    j = Json::parse(in, nullptr, true, true);
  } catch (const Json::parse_error& e) {
    throw Error("config '" + path + "': " + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const Json::exception& e) {
    throw InvalidArgumentError("config '" + path + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------

inline Json confusion_to_json(const ConfusionMatrix& cm) {
  return Json{{"counts", {{cm.counts[0][0], cm.counts[0][1]}, {cm.counts[1][0], cm.counts[1][1]}}},
              {"class_accuracy", {cm.class_accuracy(0), cm.class_accuracy(1)}},
              {"accuracy", cm.accuracy()}};
}

// Deterministic report body: timings live in timing_to_json.
inline Json report_to_json(const ExperimentReport& r) {
  Json j;
  j["schema"] = "qsvm-report";
  j["schema_version"] = kReportSchemaVersion;
  j["dataset"] = {{"source", r.data_source},
                  {"class_labels", {1, 2}},
                  {"class_counts", r.class_counts},
                  {"train_counts", r.train_counts},
                  {"test_counts", r.test_counts},
                  {"feature_dimension", r.feature_dimension}};
  j["config"] = r.config_echo;
  j["seeds"] = r.seeds;
  Json methods = Json::object();
  for (const auto& o : r.outcomes) {
    Json m;
    m["best_c"] = o.tuning.best_c;
    m["best_sigma"] = o.tuning.best_sigma;
    m["fitness"] = o.tuning.fitness;
    m["evaluations"] = o.tuning.trace.size();
    if (o.tuning.method == TuningMethod::Qga) {
      Json gens = Json::array();
      for (const auto& g : o.tuning.generations)
        gens.push_back({{"generation", g.generation}, {"best_fitness", g.best_fitness}, {"best_params", g.best_params}});
      m["generations"] = gens;
    }
    m["model"] = {{"support_vectors", o.model.support_vectors.size()}, {"bias", o.model.bias}};
    m["test"] = confusion_to_json(o.confusion);
    methods[tuning_method_name(o.tuning.method)] = m;
  }
  j["methods"] = methods;
  return j;
}

inline Json timing_to_json(const ExperimentReport& r) {
  Json j = Json::object();
  for (const auto& o : r.outcomes) j[tuning_method_name(o.tuning.method)] = {{"wall_time_seconds", o.tuning.wall_time}};
  return j;
}

// Plain-text rendering of a stored report (and optional timing document).
inline std::string render_report(const Json& report, const Json& timing = Json()) {
  std::ostringstream os;
  const auto& ds = report.at("dataset");
  os << "dataset: " << ds.at("source").get<std::string>() << "\n";
  os << "  class counts   1: " << ds.at("class_counts")[0] << "  2: " << ds.at("class_counts")[1] << "\n";
  os << "  train / test   1: " << ds.at("train_counts")[0] << " / " << ds.at("test_counts")[0]
     << "  2: " << ds.at("train_counts")[1] << " / " << ds.at("test_counts")[1] << "\n";
  os << "  features       " << ds.at("feature_dimension") << "\n";
  for (auto it = report.at("methods").begin(); it != report.at("methods").end(); ++it) {
    const auto& m = it.value();
    const auto& t = m.at("test");
    os << "\n[" << it.key() << "]\n";
    os << "  C = " << m.at("best_c").get<double>() << ", sigma = " << m.at("best_sigma").get<double>()
       << ", tuning fitness = " << m.at("fitness").get<double>() << " (" << m.at("evaluations") << " evaluations)\n";
    if (!timing.is_null() && timing.contains(it.key()))
      os << "  wall time      " << timing.at(it.key()).at("wall_time_seconds").get<double>() << " s\n";
    os << "  test accuracy  " << 100.0 * t.at("accuracy").get<double>() << " %\n";
    os << "  confusion (rows true, cols predicted)\n";
    for (int r = 0; r < 2; ++r)
      os << "    class " << r + 1 << ": " << t.at("counts")[r][0] << " " << t.at("counts")[r][1] << "   ("
         << 100.0 * t.at("class_accuracy")[r].get<double>() << " %)\n";
    if (m.contains("generations")) {
      os << "  generations\n";
      for (const auto& g : m.at("generations"))
        os << "    " << g.at("generation") << ": " << g.at("best_fitness").get<double>() << "  C="
           << g.at("best_params")[0].get<double>() << " sigma=" << g.at("best_params")[1].get<double>() << "\n";
    }
  }
  return os.str();
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace detail

inline std::vector<FeatureVector> experiment_features(const ExperimentConfig& config, std::string& source) {
  if (!config.feature_path.empty()) {
    source = "features:" + config.feature_path;
    return read_feature_file(config.feature_path);
  }
  if (!config.capture_path.empty() || !config.annotation_path.empty()) {
    if (config.capture_path.empty() || config.annotation_path.empty())
      throw InvalidArgumentError("capture_path and annotation_path must be given together");
    source = "capture:" + config.capture_path;
    return load_dataset(config.capture_path, config.annotation_path);
  }
  if (config.synthetic) {
    auto spec = *config.synthetic;
    spec.seed = config.synth_seed();
    const auto cap = synth_generate(spec);
    source = "synthetic";
    return extract_features(cap.frames, cap.annotations, "synthetic");
  }
  throw InvalidArgumentError("no data source: set feature_path, capture_path + annotation_path, or synthetic");
}

inline ExperimentReport run_experiment(const ExperimentConfig& config) {
  if (config.methods.empty()) throw InvalidArgumentError("no tuning methods requested");
  ExperimentReport report;
  report.config_echo = config_to_json(config);
  report.seeds = {{"master", config.seed},
                  {"synthetic", config.synth_seed()},
                  {"split", config.split_seed()},
                  {"protocol", config.protocol_seed()},
                  {"qga", config.qga_seed()}};

  std::vector<LabeledSample> samples;
  try {
    const auto features = experiment_features(config, report.data_source);
    samples = to_samples(features);
  } catch (const std::exception& e) {
    throw Error(std::string("data stage: ") + e.what());
  }
  report.feature_dimension = samples.empty() ? 0 : samples.front().features.size();
  for (const auto& s : samples) ++report.class_counts[s.label > 0 ? 0 : 1];

  SplitResult parts;
  try {
    parts = split(samples, config.train_per_class, config.split_seed());
  } catch (const std::exception& e) {
    throw Error(std::string("split stage: ") + e.what());
  }
  for (const auto& s : parts.train) ++report.train_counts[s.label > 0 ? 0 : 1];
  for (const auto& s : parts.test) ++report.test_counts[s.label > 0 ? 0 : 1];

  TuningProtocol protocol = config.protocol;
  protocol.seed = config.protocol_seed();
  protocol.threads = config.threads;
  QgaConfig qga = config.qga;
  qga.seed = config.qga_seed();
  qga.threads = config.threads;

  for (auto method : config.methods) {
    MethodOutcome o;
    try {
      o.tuning = method == TuningMethod::Grid ? grid_search(parts.train, config.grid, protocol)
                                              : qga_tune(parts.train, config.search_space, protocol, qga);
      TrainConfig tc;
      tc.penalty_c = o.tuning.best_c;
      tc.tolerance = protocol.svm_tolerance;
      tc.max_passes = protocol.svm_max_passes;
      o.model = train(parts.train, KernelSpec::rbf(o.tuning.best_sigma), tc);
      o.confusion = evaluate(o.model, parts.test);
    } catch (const std::exception& e) {
      throw Error(std::string(tuning_method_name(method)) + " stage: " + e.what());
    }
    report.outcomes.push_back(std::move(o));
  }

  if (!config.output_dir.empty()) {
    namespace fs = std::filesystem;
    const fs::path dir(config.output_dir);
    fs::create_directories(dir);
    detail::write_text(dir / "report.json", report_to_json(report).dump(2) + "\n");
    detail::write_text(dir / "timing.json", timing_to_json(report).dump(2) + "\n");
    for (const auto& o : report.outcomes) {
      const std::string name = tuning_method_name(o.tuning.method);
      std::ostringstream trace, model;
      write_trace(trace, o.tuning);
      detail::write_text(dir / ("trace_" + name + ".txt"), trace.str());
      write_model(model, o.model);
      detail::write_text(dir / ("model_" + name + ".txt"), model.str());
      if (o.tuning.method == TuningMethod::Qga) {
        std::ostringstream gens;
        write_generation_trace(gens, o.tuning.generations, config.search_space);
        detail::write_text(dir / "generations_qga.txt", gens.str());
      }
    }
  }
  return report;
}

}  // namespace qsvm
