// Copyright 2026 The STU Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "stu/cli.h"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "stu/checkpoint.h"
#include "stu/config.h"

namespace stu {

namespace {

namespace fs = std::filesystem;

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string ReadText(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteText(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw UsageError("cannot write " + tmp.string());
    out << text;
    if (!out.flush()) throw UsageError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::vector<double> Ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
    i = j + 1;
  }
  return rank;
}

const char* ErrorKind(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const DimensionError*>(&e)) return "dimension";
  if (dynamic_cast<const UsageError*>(&e)) return "usage";
  if (dynamic_cast<const NumericError*>(&e)) return "numeric";
  if (dynamic_cast<const ConsistencyError*>(&e)) return "consistency";
  if (dynamic_cast<const CheckpointIoError*>(&e)) return "checkpoint-io";
  if (dynamic_cast<const CheckpointVersionError*>(&e)) return "checkpoint-version";
  if (dynamic_cast<const CheckpointChecksumError*>(&e)) return "checkpoint-checksum";
  if (dynamic_cast<const CheckpointFormatError*>(&e)) return "checkpoint-format";
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return "io";
  return "internal";
}

std::string OneLine(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

RunConfig LoadConfig(const std::string& path) {
  return parse_config(ReadText(path));
}

int SplitIndex(const std::string& name) {
  if (name == "train") return 0;
  if (name == "cv") return 1;
  if (name == "test") return 2;
  throw UsageError("split must be train, cv or test, got '" + name + "'");
}

// Checkpoints carry their own config; the model and data are rebuilt
// from it.
struct LoadedCheckpoint {
  RunConfig config;
  TrainState state;
};

LoadedCheckpoint LoadCheckpoint(const std::string& path) {
  CheckpointData data = ReadCheckpoint(path);
  LoadedCheckpoint out;
  out.config = parse_config(data.config);
  out.state = UnpackTrainState(data, out.config.layers);
  return out;
}

std::string FormatMetrics(const Metrics& m, TaskKind kind) {
  std::string s = "loss=" + Num(m.loss);
  if (kind == TaskKind::kAdding) {
    s += " mse=" + Num(m.mse);
  } else {
    s += " accuracy=" + Num(m.accuracy);
  }
  return s + " frames=" + std::to_string(m.frames);
}

// Settings that shape the trajectory must agree between a checkpoint and
// the config that resumes it; output_dir and timing may differ.
void CheckResumable(const RunConfig& stored, const RunConfig& config) {
  if (stored.layers != config.layers) {
    throw ConsistencyError("resume: checkpoint layers differ from config");
  }
  if (stored.task != config.task) {
    throw ConsistencyError("resume: checkpoint task differs from config");
  }
  if (stored.train != config.train) {
    throw ConsistencyError("resume: checkpoint training settings differ from config");
  }
}

int CmdTrain(const std::string& config_path, const std::string& resume,
             int stop_after, std::ostream& out) {
  const RunConfig config = LoadConfig(config_path);
  if (!config.has_head()) {
    throw UsageError("train: the last layer must be a softmax or linear head");
  }
  const fs::path dir(config.output_dir);
  fs::create_directories(dir);
  const std::string config_text = FormatConfig(config);
  WriteText(dir / "resolved.cfg", config_text);

  TrainState state;
  if (resume.empty()) {
    state = InitTrainState(config.layers, config.train);
  } else {
    LoadedCheckpoint ck = LoadCheckpoint(resume);
    CheckResumable(ck.config, config);
    state = std::move(ck.state);
  }
  const SequenceDataset train = MakeTaskData(config.task, 0);
  const SequenceDataset cv = MakeTaskData(config.task, 1);
  WriteText(dir / "metrics.csv", FormatMetricsCsv(state.history));

  // --stop-after simulates an interruption after that many epochs.
  int ran = 0;
  Train(state, train, cv, config.train, config.log_wall_time,
        [&](const TrainState& s) {
          const EpochRecord& r = s.history.back();
          WriteCheckpoint(
              (dir / ("epoch_" + std::to_string(r.epoch) + ".ckpt")).string(),
              PackTrainState(s, config_text));
          WriteText(dir / "metrics.csv", FormatMetricsCsv(s.history));
          out << "epoch " << r.epoch << " train_loss=" << Num(r.train_loss)
              << " cv_loss=" << Num(r.cv_loss) << " lr=" << Num(r.lr) << "\n";
          return stop_after <= 0 || ++ran < stop_after;
        });
  WriteCheckpoint((dir / "last.ckpt").string(), PackTrainState(state, config_text));
  const Metrics test = evaluate(state.model, MakeTaskData(config.task, 2));
  out << "test " << FormatMetrics(test, config.task.kind) << "\n";
  return 0;
}

}  // namespace

double Spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("Spearman: length mismatch");
  if (a.size() < 2) throw UsageError("Spearman: need at least two points");
  const std::vector<double> ra = Ranks(a);
  const std::vector<double> rb = Ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::nan("");
  return sab / std::sqrt(saa * sbb);
}

std::string FormatMetricsCsv(const std::vector<EpochRecord>& history) {
  std::string s = "epoch,train_loss,cv_loss,lr,seconds\n";
  for (const EpochRecord& r : history) {
    s += std::to_string(r.epoch) + "," + Num(r.train_loss) + "," +
         Num(r.cv_loss) + "," + Num(r.lr) + "," + Num(r.seconds) + "\n";
  }
  return s;
}

int run_command(const std::vector<std::string>& args, std::ostream& out,
                std::ostream& err) {
  CLI::App app("Semi-tied unit networks: training and inspection", "stu");
  app.require_subcommand(1);

  std::string config_path, resume, checkpoint, split = "test", data_path,
                                                 out_path;
  int stop_after = 0;
  double eps = 1e-5, tol = 1e-5;
  long coords = 0;
  int layer = -1;

  auto* train = app.add_subcommand("train", "Train a model from a config file");
  train->add_option("--config", config_path, "Run config")->required();
  train->add_option("--resume", resume, "Checkpoint to continue from");
  train->add_option("--stop-after", stop_after,
                    "Stop after this many epochs in this invocation");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--checkpoint", checkpoint)->required();
  eval->add_option("--task", split, "train, cv or test");
  eval->add_option("--data", data_path, "Dataset CSV instead of generated data");

  auto* grad = app.add_subcommand("grad-check", "Finite-difference gradient check");
  grad->add_option("--config", config_path)->required();
  grad->add_option("--eps", eps, "Central-difference step");
  grad->add_option("--tol", tol, "Largest acceptable relative error");
  grad->add_option("--coords", coords, "Coordinates sampled per tensor (0 = all)");

  auto* count = app.add_subcommand("count-params", "Itemised parameter counts");
  count->add_option("--config", config_path)->required();

  auto* profile = app.add_subcommand("gate-profile", "Resting gate values per unit");
  profile->add_option("--checkpoint", checkpoint)->required();
  profile->add_option("--layer", layer, "Layer index (default: first stu_lstm)");
  profile->add_option("--out", out_path, "CSV path (default: stdout)");

  auto* gen = app.add_subcommand("gen-data", "Write a generated dataset as CSV");
  gen->add_option("--config", config_path)->required();
  gen->add_option("--split", split, "train, cv or test");
  gen->add_option("--out", out_path)->required();

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << OneLine(e.what()) << "\n";
    return 2;
  }

  try {
    if (train->parsed()) return CmdTrain(config_path, resume, stop_after, out);

    if (eval->parsed()) {
      LoadedCheckpoint ck = LoadCheckpoint(checkpoint);
      SequenceDataset data;
      if (!data_path.empty()) {
        std::ifstream in(data_path);
        if (!in) throw UsageError("cannot open " + data_path);
        data = ReadDatasetCsv(in, ck.config.task.kind, ck.config.task.classes);
      } else {
        data = MakeTaskData(ck.config.task, SplitIndex(split));
      }
      out << (data_path.empty() ? split : data_path) << " "
          << FormatMetrics(evaluate(ck.state.model, data), ck.config.task.kind)
          << "\n";
      return 0;
    }

    if (grad->parsed()) {
      const RunConfig config = LoadConfig(config_path);
      if (!config.has_head()) {
        throw UsageError("grad-check: the last layer must be a softmax or linear head");
      }
      if (coords < 0) throw UsageError("grad-check: --coords must be >= 0");
      TrainState state = InitTrainState(config.layers, config.train);
      const SequenceDataset data = MakeTaskData(config.task, 0);
      std::vector<ChunkRef> chunks = MakeChunks(data, config.train.unfold_steps);
      chunks.resize(std::min<std::size_t>(chunks.size(), 4));
      const SequenceBatch batch =
          BuildBatch(data, chunks, config.train.unfold_steps);
      GradCheckOptions options;
      options.max_coords = coords;
      options.seed = config.train.seed;
      const GradCheckReport report =
          finite_diff_check(state.model, batch, eps, options);
      for (const GradCheckEntry& e : report.tensors) {
        out << e.name << " checked=" << e.checked
            << " max_rel_err=" << Num(e.max_rel_err)
            << " mean_rel_err=" << Num(e.mean_rel_err) << "\n";
      }
      const bool ok = report.max_rel_err() < tol;
      out << "max_rel_err=" << Num(report.max_rel_err())
          << (ok ? " PASS" : " FAIL") << "\n";
      return ok ? 0 : 1;
    }

    if (count->parsed()) {
      const RunConfig config = LoadConfig(config_path);
      const StackCount c = count_params(std::span<const LayerSpec>(config.layers));
      auto line = [&](const std::string& label, const ParamCount& p) {
        out << label << " weights=" << p.weights << " biases=" << p.biases
            << " peepholes=" << p.peepholes << " eta=" << p.eta
            << " gamma=" << p.gamma << " projection=" << p.projection
            << " total=" << p.total() << "\n";
      };
      for (std::size_t k = 0; k < c.layers.size(); ++k) {
        line("layer" + std::to_string(k) + " " + LayerTypeName(config.layers[k].type),
             c.layers[k]);
      }
      line("hidden_total", c.hidden);
      line("total", c.total);
      return 0;
    }

    if (profile->parsed()) {
      LoadedCheckpoint ck = LoadCheckpoint(checkpoint);
      const auto& layers = ck.state.model.layers;
      if (layer < 0) {
        for (std::size_t k = 0; k < layers.size(); ++k) {
          if (ck.config.layers[k].type == LayerType::kStuLstm) {
            layer = static_cast<int>(k);
            break;
          }
        }
        if (layer < 0) throw UsageError("gate-profile: model has no stu_lstm layer");
      }
      if (static_cast<std::size_t>(layer) >= layers.size()) {
        throw UsageError("gate-profile: layer " + std::to_string(layer) +
                         " out of range");
      }
      const auto* lstm = std::get_if<LstmParams<double>>(&layers[layer]);
      if (lstm == nullptr) {
        throw UsageError("gate-profile: layer " + std::to_string(layer) +
                         " is not an LSTM layer");
      }
      const std::vector<GateProfileRow> rows = gate_profile(*lstm);
      std::string csv = "unit,input_gate,forget_gate,candidate\n";
      std::vector<double> in_gate, forget;
      for (const GateProfileRow& r : rows) {
        csv += std::to_string(r.unit) + "," + Num(r.input_gate) + "," +
               Num(r.forget_gate) + "," + Num(r.candidate) + "\n";
        in_gate.push_back(r.input_gate);
        forget.push_back(r.forget_gate);
      }
      if (out_path.empty()) {
        out << csv;
      } else {
        WriteText(out_path, csv);
      }
      if (rows.size() >= 2) {
        err << "spearman(input_gate,forget_gate)=" << Num(Spearman(in_gate, forget))
            << "\n";
      }
      return 0;
    }

    if (gen->parsed()) {
      const RunConfig config = LoadConfig(config_path);
      const SequenceDataset data = MakeTaskData(config.task, SplitIndex(split));
      std::ostringstream csv;
      WriteDatasetCsv(data, csv);
      WriteText(out_path, csv.str());
      out << "wrote " << data.size() << " sequences (" << data.frames()
          << " frames) to " << out_path << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << ErrorKind(e) << ": " << OneLine(e.what()) << "\n";
    return 1;
  }
  return 2;
}

}  // namespace stu
