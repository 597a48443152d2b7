// qsvm: skeleton action features, SVM tuning by grid search or QGA, and
// end-to-end experiments.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "qsvm/qsvm.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string method;
  std::string out;
  std::string fitness;
  std::optional<int> generations;
  std::optional<int> population;
  std::optional<unsigned> threads;
};

void add_tuning_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "Experiment config (JSON)");
  cmd->add_option("--seed", f.seed, "Master seed");
  cmd->add_option("--method", f.method, "Tuning method")->check(CLI::IsMember({"grid", "qga", "both"}));
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--fitness", f.fitness, "Fitness protocol")->check(CLI::IsMember({"cv", "holdout", "train"}));
  cmd->add_option("--generations", f.generations, "QGA generations")->check(CLI::NonNegativeNumber);
  cmd->add_option("--population", f.population, "QGA population size")->check(CLI::Range(2, 1 << 20));
  cmd->add_option("--threads", f.threads, "Worker threads for fitness evaluation")->check(CLI::Range(1u, 1024u));
}

qsvm::ExperimentConfig resolve_config(const CommonFlags& f) {
  qsvm::ExperimentConfig c =
      f.config.empty() ? qsvm::ExperimentConfig::synthetic_default() : qsvm::read_config_file(f.config);
  if (f.seed) c.seed = *f.seed;
  if (!f.method.empty()) {
    c.methods.clear();
    if (f.method != "qga") c.methods.push_back(qsvm::TuningMethod::Grid);
    if (f.method != "grid") c.methods.push_back(qsvm::TuningMethod::Qga);
  }
  if (!f.out.empty()) c.output_dir = f.out;
  if (!f.fitness.empty()) c.protocol.mode = qsvm::detail::parse_fitness_mode(f.fitness);
  if (f.generations) c.qga.max_generations = *f.generations;
  if (f.population) c.qga.population_size = *f.population;
  if (f.threads) c.threads = *f.threads;
  return c;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw qsvm::Error("cannot write '" + path.string() + "'");
  out << text;
}

qsvm::Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw qsvm::Error("cannot open '" + path.string() + "'");
  return qsvm::Json::parse(in);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint-angle variance features and QGA-tuned SVM classification"};
  app.require_subcommand(1);

  // extract
  std::string capture, annotations, extract_out;
  std::size_t window = 0, stride = 0;
  auto* extract = app.add_subcommand("extract", "Capture + annotations -> feature file");
  extract->add_option("--capture", capture, "Skeleton capture file")->required();
  auto* ann_opt = extract->add_option("--annotations", annotations, "Annotation file");
  auto* win_opt = extract->add_option("--window", window, "Sliding window length (unannotated mode)");
  extract->add_option("--stride", stride, "Sliding window stride (defaults to the window length)");
  ann_opt->excludes(win_opt);
  extract->add_option("--out", extract_out, "Feature file to write (stdout if omitted)");

  // synth
  std::string synth_out = "synthetic";
  std::uint64_t synth_seed = 1;
  qsvm::SynthSpec synth_spec;
  std::optional<double> ratio;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic two-class capture");
  synth->add_option("--out", synth_out, "Output directory (capture.txt, annotations.txt)");
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--class1", synth_spec.windows_per_class[0], "Windows of class 1");
  synth->add_option("--class2", synth_spec.windows_per_class[1], "Windows of class 2");
  synth->add_option("--frames", synth_spec.frames_per_window, "Frames per window");
  synth->add_option("--ratio", ratio, "Class-2/class-1 left-elbow amplitude ratio");
  synth->add_option("--noise", synth_spec.position_noise, "Joint position noise (metres)");

  // tune
  std::string tune_features;
  CommonFlags tune_flags;
  auto* tune = app.add_subcommand("tune", "Tune (C, sigma) on a feature file");
  tune->add_option("--features", tune_features, "Feature file")->required();
  add_tuning_flags(tune, tune_flags);

  // run
  CommonFlags run_flags;
  auto* run = app.add_subcommand("run", "Run a full experiment");
  add_tuning_flags(run, run_flags);

  // report
  std::string report_path;
  auto* report = app.add_subcommand("report", "Render a stored report");
  report->add_option("path", report_path, "Report directory or report.json")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*extract) {
      const auto frames = qsvm::read_capture_file(capture);
      std::vector<qsvm::Annotation> anns;
      if (!annotations.empty())
        anns = qsvm::read_annotation_file(annotations);
      else if (window > 0)
        anns = qsvm::sliding_windows(frames.size(), window, stride ? stride : window);
      else
        throw qsvm::InvalidArgumentError("extract needs --annotations or --window");
      const auto features = qsvm::extract_features(frames, anns, capture);
      std::ostringstream os;
      qsvm::write_features(os, features);
      if (extract_out.empty())
        std::cout << os.str();
      else
        write_file(extract_out, os.str());
      std::cerr << "extracted " << features.size() << " feature vectors\n";
    } else if (*synth) {
      synth_spec.seed = synth_seed;
      if (ratio) synth_spec.with_left_amplitude_ratio(*ratio);
      const auto cap = qsvm::synth_generate(synth_spec);
      std::ostringstream c, a;
      qsvm::write_capture(c, cap.frames);
      qsvm::write_annotations(a, cap.annotations);
      write_file(fs::path(synth_out) / "capture.txt", c.str());
      write_file(fs::path(synth_out) / "annotations.txt", a.str());
      std::cerr << "wrote " << cap.frames.size() << " frames, " << cap.annotations.size() << " windows to "
                << synth_out << "\n";
    } else if (*tune) {
      auto cfg = resolve_config(tune_flags);
      const auto samples = qsvm::to_samples(qsvm::read_feature_file(tune_features));
      auto protocol = cfg.protocol;
      protocol.seed = cfg.protocol_seed();
      protocol.threads = cfg.threads;
      auto qga = cfg.qga;
      qga.seed = cfg.qga_seed();
      qga.threads = cfg.threads;
      for (auto m : cfg.methods) {
        const auto r = m == qsvm::TuningMethod::Grid ? qsvm::grid_search(samples, cfg.grid, protocol)
                                                     : qsvm::qga_tune(samples, cfg.search_space, protocol, qga);
        std::cout << qsvm::tuning_method_name(m) << ": C=" << r.best_c << " sigma=" << r.best_sigma
                  << " fitness=" << r.fitness << " evaluations=" << r.trace.size() << " time=" << r.wall_time
                  << "s\n";
        if (!cfg.output_dir.empty()) {
          std::ostringstream os;
          qsvm::write_trace(os, r);
          write_file(fs::path(cfg.output_dir) / ("trace_" + std::string(qsvm::tuning_method_name(m)) + ".txt"),
                     os.str());
          if (m == qsvm::TuningMethod::Qga) {
            std::ostringstream gs;
            qsvm::write_generation_trace(gs, r.generations, cfg.search_space);
            write_file(fs::path(cfg.output_dir) / "generations_qga.txt", gs.str());
          }
        }
      }
    } else if (*run) {
      auto cfg = resolve_config(run_flags);
      if (cfg.output_dir.empty()) cfg.output_dir = "qsvm-out";
      const auto r = qsvm::run_experiment(cfg);
      std::cout << qsvm::render_report(qsvm::report_to_json(r), qsvm::timing_to_json(r));
      std::cerr << "report written to " << cfg.output_dir << "\n";
    } else if (*report) {
      fs::path p(report_path);
      fs::path dir = fs::is_directory(p) ? p : p.parent_path();
      if (fs::is_directory(p)) p /= "report.json";
      const auto body = read_json(p);
      qsvm::Json timing;
      if (fs::exists(dir / "timing.json")) timing = read_json(dir / "timing.json");
      std::cout << qsvm::render_report(body, timing);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
