#pragma once

// The four CLI commands as library calls: they take parsed options, read and
// write files, and report to the given streams. Exit-code mapping lives in
// the executable.

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include "glode/io.hpp"
#include "glode/pipeline.hpp"
#include "glode/synthlab.hpp"

namespace glode::cli {

namespace fs = std::filesystem;

struct SimulateOptions {
  std::optional<fs::path> config_path;
  fs::path out_dir;
  std::optional<std::uint64_t> seed;
};

/// Generates a benchmark dataset into out_dir and prints a one-line summary.
inline SynthDataset cmd_simulate(const SimulateOptions& opt, std::ostream& out) {
  SynthConfig cfg = opt.config_path ? io::load_synth_config(*opt.config_path) : SynthConfig{};
  if (opt.seed) cfg.seed = *opt.seed;
  SynthDataset data = generate(cfg);
  io::write_dataset(opt.out_dir, cfg, data);

  std::vector<std::size_t> per_split(3, 0), entities(3, 0);
  for (std::size_t i = 0; i < data.dataset.records.size(); ++i) {
    const auto s = static_cast<std::size_t>(data.dataset.records[i].split);
    ++per_split[s];
    if (data.truth.gold[i] != data.dataset.labels.o_index()) ++entities[s];
  }
  out << "dataset " << opt.out_dir.string() << ": " << data.dataset.records.size() << " records, dim " << cfg.dim
      << ", " << data.dataset.labels.size() << " classes; source " << per_split[0] << " (" << entities[0]
      << " entities), target " << per_split[1] << " (" << entities[1] << "), target_test " << per_split[2] << " ("
      << entities[2] << ")\n";
  return data;
}

struct RunOptions {
  fs::path dataset_dir;
  fs::path out_dir;
  int epochs = 8;
  std::size_t k = kBenchmarkK;
  double alpha = 0.99;
  double beta_start = 0.95;
  double beta_end = 0.80;
  bool no_global = false;
  bool no_local = false;
  bool single_direction = false;
  std::optional<double> drift;      // default: generator drift_eta, else 0
  std::optional<double> flip_rate;  // default: generator flip_rate, else 0
  std::size_t denoise_dim = 128;
  std::optional<std::uint64_t> seed;  // default: generator seed, else 42
  double learning_rate = 0.1;
  int source_epochs = 20;
  std::size_t batch_size = 32;
};

/// Ground truth for metrics: gold.jsonl when present, otherwise whatever gold
/// the records themselves carry.
inline std::vector<ClassIndex> metrics_gold(const io::LoadedDataset& data) {
  if (data.gold) return *data.gold;
  std::vector<ClassIndex> gold;
  for (const Record& r : data.dataset.records) gold.push_back(r.gold.value_or(kUnknownClass));
  return gold;
}

inline PipelineConfig pipeline_config(const RunOptions& opt, const io::LoadedDataset& data) {
  PipelineConfig cfg;
  cfg.train.learning_rate = opt.learning_rate;
  cfg.train.epochs_source = opt.source_epochs;
  cfg.train.batch_size = opt.batch_size;
  cfg.schedule = BetaSchedule{opt.beta_start, opt.beta_end, opt.epochs};
  cfg.k = opt.k;
  cfg.alpha = opt.alpha;
  cfg.flags = DenoiseFlags{!opt.no_global, !opt.no_local, opt.single_direction};
  cfg.denoise_dim = opt.denoise_dim;
  const SynthConfig gen = data.generator.value_or(SynthConfig{});
  cfg.drift_eta = opt.drift.value_or(data.generator ? gen.drift_eta : 0.0);
  cfg.flip_rate = opt.flip_rate.value_or(data.generator ? gen.flip_rate : 0.0);
  cfg.seed = opt.seed.value_or(data.generator ? gen.seed : 42);
  cfg.validate();
  return cfg;
}

inline void emit_warnings(const PipelineResult& r, std::ostream& err) {
  for (const auto& w : r.warnings) err << "warning: " << w << "\n";
}

/// Full pipeline; writes records.jsonl (refined pseudo labels) and
/// metrics.jsonl into out_dir.
inline PipelineResult cmd_run(const RunOptions& opt, std::ostream& out, std::ostream& err) {
  const io::LoadedDataset data = io::load_dataset(opt.dataset_dir);
  const PipelineConfig cfg = pipeline_config(opt, data);
  const std::vector<ClassIndex> gold = metrics_gold(data);

  PipelineResult result = run_pipeline(data.dataset, gold, cfg);
  emit_warnings(result, err);

  std::error_code ec;
  fs::create_directories(opt.out_dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + opt.out_dir.string() + ": " + ec.message());
  io::write_file_atomic(opt.out_dir / io::kRecordsFile, io::encode_records(result.records));
  io::write_file_atomic(opt.out_dir / "metrics.jsonl", io::encode_metrics(result.epochs));

  out << "initial pseudo_f1 " << io::format_real(result.initial_pseudo_f1) << ", final pseudo_f1 "
      << io::format_real(result.final_pseudo_f1()) << ", final probe_test_f1 "
      << io::format_real(result.final_test_f1()) << " after " << result.epochs.size() << " epochs\n";
  return result;
}

/// Runs every ablation strategy; writes ablation.csv and one metrics stream
/// per strategy (<strategy>.metrics.jsonl).
inline AblationTable cmd_ablate(const RunOptions& opt, std::ostream& out, std::ostream& err) {
  const io::LoadedDataset data = io::load_dataset(opt.dataset_dir);
  const PipelineConfig cfg = pipeline_config(opt, data);
  const std::vector<ClassIndex> gold = metrics_gold(data);

  AblationTable table = run_ablation(data.dataset, gold, cfg);
  emit_warnings(table.rows.front().run, err);

  std::error_code ec;
  fs::create_directories(opt.out_dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + opt.out_dir.string() + ": " + ec.message());
  const std::string csv = io::encode_ablation_csv(table);
  io::write_file_atomic(opt.out_dir / "ablation.csv", csv);
  for (const auto& row : table.rows)
    io::write_file_atomic(opt.out_dir / (std::string(to_string(row.strategy)) + ".metrics.jsonl"),
                          io::encode_metrics(row.run.epochs));
  out << csv;
  return table;
}

struct EvalOptions {
  fs::path records_path;
  fs::path gold_path;
  std::optional<fs::path> labels_path;  // default: labels.json next to the gold sidecar
  Split split = Split::Target;
};

/// Scores the hard pseudo labels of one split against the gold sidecar and
/// prints the report as a single JSON object.
inline EvalReport cmd_eval(const EvalOptions& opt, std::ostream& out, std::ostream& err) {
  const fs::path labels_path = opt.labels_path.value_or(opt.gold_path.parent_path() / io::kLabelsFile);
  const LabelSpace labels = io::decode_labels(io::read_file(labels_path));
  const auto records = io::decode_records(io::read_file(opt.records_path), labels.size());
  const auto gold_entries = io::decode_gold(io::read_file(opt.gold_path), labels.size());
  const auto gold = io::align_gold(records, gold_entries);

  std::vector<ClassIndex> pred, truth;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].split != opt.split) continue;
    if (!records[i].pseudo)
      throw Error(ErrorKind::MissingTarget, "record " + std::to_string(records[i].id) + " has no pseudo label");
    pred.push_back(hard_label(*records[i].pseudo));
    truth.push_back(gold[i]);
  }
  const EvalReport rep = span_f1(pred, truth, labels.o_index(), labels.size());
  if (rep.gold_entities == 0) err << "warning: gold labels contain no entities; F1 is 0\n";

  std::string line = "{\"split\":\"" + std::string(to_string(opt.split)) + "\"";
  line += ",\"count\":" + std::to_string(pred.size());
  line += ",\"precision\":" + io::format_real(rep.precision);
  line += ",\"recall\":" + io::format_real(rep.recall);
  line += ",\"f1\":" + io::format_real(rep.f1);
  line += ",\"per_class_f1\":{";
  for (ClassIndex c = 0; c < labels.size(); ++c) {
    if (c) line += ',';
    line += io::ordered_json(labels.name(c)).dump() + ":" + io::format_real(rep.per_class_f1[c]);
  }
  line += "},\"support\":{";
  for (ClassIndex c = 0; c < labels.size(); ++c) {
    if (c) line += ',';
    line += io::ordered_json(labels.name(c)).dump() + ":" + std::to_string(rep.support[c]);
  }
  line += "}}";
  out << line << "\n";
  return rep;
}

/// Exit codes: 0 success, 2 usage, 3 format, 4 runtime.
inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::FormatError: return 3;
    case ErrorKind::ConfigInvalid:
    case ErrorKind::InvalidArgument: return 2;
    default: return 4;
  }
}

}  // namespace glode::cli
