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

#include "stu/config.h"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <set>
#include <sstream>

namespace stu {

namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string FormatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Entry {
  std::string value;
  int line = 0;
};

struct Section {
  int line = 0;  // line of the [layer] header
  std::map<std::string, Entry> keys;
};

std::int64_t ParseInt(const std::string& key, const Entry& e) {
  std::int64_t v = 0;
  const char* end = e.value.data() + e.value.size();
  auto [ptr, ec] = std::from_chars(e.value.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(e.line, key + ": expected an integer, got '" + e.value + "'");
  }
  return v;
}

std::uint64_t ParseSeed(const std::string& key, const Entry& e) {
  std::uint64_t v = 0;
  const char* end = e.value.data() + e.value.size();
  auto [ptr, ec] = std::from_chars(e.value.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(e.line, key + ": expected a non-negative integer, got '" +
                                  e.value + "'");
  }
  return v;
}

double ParseDouble(const std::string& key, const Entry& e) {
  char* end = nullptr;
  const double v = std::strtod(e.value.c_str(), &end);
  if (e.value.empty() || end != e.value.c_str() + e.value.size() ||
      !std::isfinite(v)) {
    throw ConfigError(e.line, key + ": expected a finite number, got '" +
                                  e.value + "'");
  }
  return v;
}

bool ParseBool(const std::string& key, const Entry& e) {
  if (e.value == "true" || e.value == "1") return true;
  if (e.value == "false" || e.value == "0") return false;
  throw ConfigError(e.line, key + ": expected true or false, got '" + e.value + "'");
}

Index Positive(const std::string& key, const Entry& e) {
  const std::int64_t v = ParseInt(key, e);
  if (v <= 0) {
    throw ConfigError(e.line, key + " must be positive, got " + e.value);
  }
  return static_cast<Index>(v);
}

std::string Describe(std::size_t k, const LayerSpec& s) {
  return "layer " + std::to_string(k) + " (" + LayerTypeName(s.type) + " " +
         std::to_string(s.in) + "->" + std::to_string(s.output_dim()) + ")";
}

LayerSpec ParseLayer(const Section& sec) {
  static const std::set<std::string> kKnown = {
      "type", "in", "out", "proj", "activation", "carry",
      "untie_v", "untie_b", "frozen_eta"};
  for (const auto& [key, e] : sec.keys) {
    if (!kKnown.count(key)) {
      throw ConfigError(e.line, "unknown layer key '" + key + "'");
    }
  }
  auto type_it = sec.keys.find("type");
  if (type_it == sec.keys.end()) {
    throw ConfigError(sec.line, "layer is missing 'type'");
  }
  const auto type = ParseLayerType(type_it->second.value);
  if (!type) {
    throw ConfigError(type_it->second.line,
                      "unknown layer type '" + type_it->second.value + "'");
  }
  LayerSpec s;
  s.type = *type;
  for (const char* key : {"in", "out"}) {
    auto it = sec.keys.find(key);
    if (it == sec.keys.end()) {
      throw ConfigError(sec.line, std::string("layer is missing '") + key + "'");
    }
    (std::string(key) == "in" ? s.in : s.out) = Positive(key, it->second);
  }

  const bool highway =
      s.type == LayerType::kHighway || s.type == LayerType::kStuHighway;
  auto allowed = [&](const std::string& key) {
    if (key == "proj") return s.type == LayerType::kLstmp;
    if (key == "activation") return highway || s.type == LayerType::kDense;
    if (key == "carry") return highway;
    if (key == "untie_v" || key == "untie_b" || key == "frozen_eta") {
      return s.type == LayerType::kStuLstm;
    }
    return true;
  };
  for (const auto& [key, e] : sec.keys) {
    if (!allowed(key)) {
      throw ConfigError(e.line, "key '" + key + "' does not apply to layer type " +
                                    LayerTypeName(s.type));
    }
    if (key == "proj") {
      s.proj = Positive(key, e);
    } else if (key == "activation") {
      if (e.value == "sigmoid") {
        s.activation = CandidateKind::kSigmoid;
      } else if (e.value == "relu") {
        s.activation = CandidateKind::kReLU;
      } else {
        throw ConfigError(e.line, "activation: expected sigmoid or relu, got '" +
                                      e.value + "'");
      }
    } else if (key == "carry") {
      if (e.value == "independent") {
        s.carry = CarryMode::kIndependent;
      } else if (e.value == "coupled") {
        s.carry = CarryMode::kCoupled;
      } else {
        throw ConfigError(e.line, "carry: expected independent or coupled, got '" +
                                      e.value + "'");
      }
    } else if (key == "untie_v") {
      s.untie_v = ParseBool(key, e);
    } else if (key == "untie_b") {
      s.untie_b = ParseBool(key, e);
    } else if (key == "frozen_eta") {
      s.frozen_eta = ParseBool(key, e);
    }
  }
  if (s.type == LayerType::kLstmp && s.proj == 0) {
    throw ConfigError(sec.line, "lstmp layer is missing 'proj'");
  }
  if (highway && s.in != s.out) {
    throw ConfigError(sec.line, "highway layer must be square, got in=" +
                                    std::to_string(s.in) +
                                    " out=" + std::to_string(s.out));
  }
  return s;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  std::map<std::string, Entry> global;
  std::vector<Section> sections;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = Trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line != "[layer]") {
        throw ConfigError(line_no, "unknown section '" + line + "'");
      }
      sections.push_back({line_no, {}});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(line_no, "expected key = value, got '" + line + "'");
    }
    const std::string key = Trim(line.substr(0, eq));
    const std::string value = Trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(line_no, "missing key before '='");
    auto& table = sections.empty() ? global : sections.back().keys;
    if (!table.emplace(key, Entry{value, line_no}).second) {
      throw ConfigError(line_no, "duplicate key '" + key + "'");
    }
  }

  RunConfig c;
  for (const auto& [key, e] : global) {
    if (key == "seed") {
      c.train.seed = ParseSeed(key, e);
    } else if (key == "data_seed") {
      c.task.data_seed = ParseSeed(key, e);
    } else if (key == "task") {
      if (e.value == "adding") {
        c.task.kind = TaskKind::kAdding;
      } else if (e.value == "frames") {
        c.task.kind = TaskKind::kFrameClassification;
      } else {
        throw ConfigError(e.line, "task: expected adding or frames, got '" +
                                      e.value + "'");
      }
    } else if (key == "task.length") {
      c.task.length = Positive(key, e);
    } else if (key == "task.train") {
      c.task.train = Positive(key, e);
    } else if (key == "task.cv") {
      c.task.cv = Positive(key, e);
    } else if (key == "task.test") {
      c.task.test = Positive(key, e);
    } else if (key == "task.dim") {
      c.task.dim = Positive(key, e);
    } else if (key == "task.classes") {
      c.task.classes = Positive(key, e);
    } else if (key == "task.noise") {
      c.task.noise = ParseDouble(key, e);
      if (c.task.noise < 0) throw ConfigError(e.line, "task.noise must be >= 0");
    } else if (key == "task.persistence") {
      c.task.persistence = ParseDouble(key, e);
      if (c.task.persistence < 0 || c.task.persistence > 1) {
        throw ConfigError(e.line, "task.persistence must lie in [0, 1]");
      }
    } else if (key == "unfold_steps") {
      c.train.unfold_steps = Positive(key, e);
    } else if (key == "minibatch") {
      c.train.minibatch = Positive(key, e);
    } else if (key == "learning_rate") {
      c.train.learning_rate = ParseDouble(key, e);
      if (c.train.learning_rate <= 0) {
        throw ConfigError(e.line, "learning_rate must be positive");
      }
    } else if (key == "weight_decay") {
      c.train.weight_decay = ParseDouble(key, e);
      if (c.train.weight_decay < 0) {
        throw ConfigError(e.line, "weight_decay must be >= 0");
      }
    } else if (key == "momentum") {
      c.train.momentum = ParseDouble(key, e);
      if (c.train.momentum < 0 || c.train.momentum >= 1) {
        throw ConfigError(e.line, "momentum must lie in [0, 1)");
      }
    } else if (key == "max_epochs") {
      c.train.max_epochs = static_cast<int>(Positive(key, e));
    } else if (key == "ramp_threshold") {
      c.train.ramp_threshold = ParseDouble(key, e);
    } else if (key == "stop_threshold") {
      c.train.stop_threshold = ParseDouble(key, e);
    } else if (key == "output_dir") {
      if (e.value.empty()) throw ConfigError(e.line, "output_dir is empty");
      c.output_dir = e.value;
    } else if (key == "log_wall_time") {
      c.log_wall_time = ParseBool(key, e);
    } else {
      throw ConfigError(e.line, "unknown key '" + key + "'");
    }
  }
  if (c.task.kind == TaskKind::kAdding && c.task.length < 2) {
    throw ConfigError(global.count("task.length") ? global["task.length"].line : 0,
                      "task.length must be at least 2 for the adding task");
  }
  if (c.task.kind == TaskKind::kFrameClassification && c.task.classes < 2) {
    throw ConfigError(global["task.classes"].line,
                      "task.classes must be at least 2");
  }

  if (sections.empty()) {
    throw ConfigError(line_no, "configuration defines no [layer] sections");
  }
  for (const Section& sec : sections) c.layers.push_back(ParseLayer(sec));

  const Index want_in = c.task.input_dim();
  if (c.layers.front().in != want_in) {
    throw ConfigError(sections.front().line,
                      Describe(0, c.layers.front()) + " takes " +
                          std::to_string(c.layers.front().in) + " inputs but task " +
                          TaskKindName(c.task.kind) + " provides " +
                          std::to_string(want_in));
  }
  for (std::size_t k = 0; k + 1 < c.layers.size(); ++k) {
    const LayerSpec& a = c.layers[k];
    const LayerSpec& b = c.layers[k + 1];
    if (IsHead(a.type)) {
      throw ConfigError(sections[k].line, Describe(k, a) +
                                              ": output head must be the last layer");
    }
    if (a.output_dim() != b.in) {
      throw ConfigError(sections[k + 1].line,
                        "dimension chain broken: " + Describe(k, a) + " feeds " +
                            Describe(k + 1, b));
    }
  }
  const LayerSpec& last = c.layers.back();
  const int last_line = sections.back().line;
  if (IsHead(last.type)) {
    if (c.task.kind == TaskKind::kAdding &&
        (last.type != LayerType::kLinear || last.out != 1)) {
      throw ConfigError(last_line,
                        "adding task needs a linear head with out = 1");
    }
    if (c.task.kind == TaskKind::kFrameClassification &&
        (last.type != LayerType::kSoftmax || last.out != c.task.classes)) {
      throw ConfigError(last_line, "frames task needs a softmax head with out = " +
                                       std::to_string(c.task.classes));
    }
  }
  return c;
}

std::string FormatConfig(const RunConfig& c) {
  std::ostringstream o;
  o << "seed = " << c.train.seed << "\n";
  o << "data_seed = " << c.task.data_seed << "\n";
  o << "task = " << TaskKindName(c.task.kind) << "\n";
  o << "task.length = " << c.task.length << "\n";
  o << "task.train = " << c.task.train << "\n";
  o << "task.cv = " << c.task.cv << "\n";
  o << "task.test = " << c.task.test << "\n";
  o << "task.dim = " << c.task.dim << "\n";
  o << "task.classes = " << c.task.classes << "\n";
  o << "task.noise = " << FormatDouble(c.task.noise) << "\n";
  o << "task.persistence = " << FormatDouble(c.task.persistence) << "\n";
  o << "unfold_steps = " << c.train.unfold_steps << "\n";
  o << "minibatch = " << c.train.minibatch << "\n";
  o << "learning_rate = " << FormatDouble(c.train.learning_rate) << "\n";
  o << "weight_decay = " << FormatDouble(c.train.weight_decay) << "\n";
  o << "momentum = " << FormatDouble(c.train.momentum) << "\n";
  o << "max_epochs = " << c.train.max_epochs << "\n";
  o << "ramp_threshold = " << FormatDouble(c.train.ramp_threshold) << "\n";
  o << "stop_threshold = " << FormatDouble(c.train.stop_threshold) << "\n";
  o << "output_dir = " << c.output_dir << "\n";
  o << "log_wall_time = " << (c.log_wall_time ? "true" : "false") << "\n";
  for (const LayerSpec& s : c.layers) {
    o << "\n[layer]\n";
    o << "type = " << LayerTypeName(s.type) << "\n";
    o << "in = " << s.in << "\n";
    o << "out = " << s.out << "\n";
    if (s.type == LayerType::kLstmp) o << "proj = " << s.proj << "\n";
    const bool highway =
        s.type == LayerType::kHighway || s.type == LayerType::kStuHighway;
    if (highway || s.type == LayerType::kDense) {
      o << "activation = "
        << (s.activation == CandidateKind::kSigmoid ? "sigmoid" : "relu") << "\n";
    }
    if (highway) {
      o << "carry = "
        << (s.carry == CarryMode::kIndependent ? "independent" : "coupled")
        << "\n";
    }
    if (s.type == LayerType::kStuLstm) {
      o << "untie_v = " << (s.untie_v ? "true" : "false") << "\n";
      o << "untie_b = " << (s.untie_b ? "true" : "false") << "\n";
      o << "frozen_eta = " << (s.frozen_eta ? "true" : "false") << "\n";
    }
  }
  return o.str();
}

SequenceDataset MakeTaskData(const TaskConfig& task, int split) {
  if (split < 0 || split > 2) throw UsageError("MakeTaskData: split must be 0..2");
  // Independent stream per split, all derived from data_seed.
  Rng derive(task.data_seed);
  std::uint64_t seed = 0;
  for (int k = 0; k <= split; ++k) seed = derive.NextU64();
  const Index n = split == 0 ? task.train : split == 1 ? task.cv : task.test;
  if (task.kind == TaskKind::kAdding) return gen_adding(n, task.length, seed);
  FrameTaskOptions options;
  options.noise = task.noise;
  options.persistence = task.persistence;
  options.sequence_length = task.length;
  return gen_frame_classification(n, task.dim, task.classes, seed, options);
}

}  // namespace stu
