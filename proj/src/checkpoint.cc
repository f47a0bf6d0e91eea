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

#include "stu/checkpoint.h"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

namespace stu {

namespace {

constexpr char kMagic[8] = {'S', 'T', 'U', 'C', 'K', 'P', 'T', '\0'};

class Writer {
 public:
  void Bytes(const void* p, std::size_t n) {
    out_.append(static_cast<const char*>(p), n);
  }
  void U32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>(v >> (8 * i)));
  }
  void U64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>(v >> (8 * i)));
  }
  void F64(double v) { U64(std::bit_cast<std::uint64_t>(v)); }
  void Str32(const std::string& s) {
    U32(static_cast<std::uint32_t>(s.size()));
    Bytes(s.data(), s.size());
  }
  std::string& str() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(const std::string& in, std::size_t end) : in_(in), end_(end) {}
  void Need(std::size_t n) {
    if (end_ - pos_ < n) {
      throw CheckpointFormatError("checkpoint: record overruns payload");
    }
  }
  std::uint64_t Uint(int bytes) {
    Need(bytes);
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i]))
           << (8 * i);
    }
    pos_ += bytes;
    return v;
  }
  std::uint32_t U32() { return static_cast<std::uint32_t>(Uint(4)); }
  std::uint64_t U64() { return Uint(8); }
  double F64() { return std::bit_cast<double>(U64()); }
  std::string Str(std::size_t n) {
    Need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::string& in_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

std::uint32_t Crc(const std::string& bytes, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t done = 0;
  while (done < n) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n - done, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + done), chunk);
    done += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::string EncodeCheckpoint(const CheckpointData& data) {
  Writer w;
  w.Bytes(kMagic, sizeof(kMagic));
  w.U32(kCheckpointVersion);
  w.U64(data.config.size());
  w.Bytes(data.config.data(), data.config.size());
  w.U32(static_cast<std::uint32_t>(data.tensors.size()));
  for (const NamedTensor& t : data.tensors) {
    w.Str32(t.name);
    w.U64(static_cast<std::uint64_t>(t.value.rows()));
    w.U64(static_cast<std::uint64_t>(t.value.cols()));
    for (Index i = 0; i < t.value.size(); ++i) w.F64(t.value.data()[i]);
  }
  w.U64(data.rng.seed());
  w.U64(data.rng.counter());
  w.U32(Crc(w.str(), w.str().size()));
  return std::move(w.str());
}

CheckpointData DecodeCheckpoint(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) + 4 + 4 ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    // A truncated header cannot carry a valid checksum either.
    if (bytes.size() >= sizeof(kMagic) &&
        std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
      throw CheckpointFormatError("checkpoint: bad magic bytes");
    }
    throw CheckpointChecksumError("checkpoint: file too short");
  }
  const std::size_t payload = bytes.size() - 4;
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) {
    stored |= static_cast<std::uint32_t>(
                  static_cast<unsigned char>(bytes[payload + i]))
              << (8 * i);
  }
  if (stored != Crc(bytes, payload)) {
    throw CheckpointChecksumError("checkpoint: checksum mismatch");
  }
  Reader r(bytes, payload);
  r.Str(sizeof(kMagic));
  const std::uint32_t version = r.U32();
  if (version != kCheckpointVersion) {
    throw CheckpointVersionError("checkpoint: format version " +
                                 std::to_string(version) + ", expected " +
                                 std::to_string(kCheckpointVersion));
  }
  CheckpointData data;
  data.config = r.Str(r.U64());
  const std::uint32_t count = r.U32();
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedTensor t;
    t.name = r.Str(r.U32());
    const std::uint64_t rows = r.U64();
    const std::uint64_t cols = r.U64();
    if (cols != 0 && rows > (payload - r.pos()) / 8 / cols) {
      throw CheckpointFormatError("checkpoint: tensor " + t.name +
                                  " larger than file");
    }
    t.value.resize(static_cast<Index>(rows), static_cast<Index>(cols));
    for (Index i = 0; i < t.value.size(); ++i) t.value.data()[i] = r.F64();
    data.tensors.push_back(std::move(t));
  }
  const std::uint64_t seed = r.U64();
  const std::uint64_t counter = r.U64();
  data.rng = Rng(seed, counter);
  if (r.pos() != payload) {
    throw CheckpointFormatError("checkpoint: trailing bytes before checksum");
  }
  return data;
}

void WriteCheckpoint(const std::string& path, const CheckpointData& data) {
  const std::string bytes = EncodeCheckpoint(data);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointIoError("checkpoint: cannot open " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw CheckpointIoError("checkpoint: write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw CheckpointIoError("checkpoint: cannot rename " + tmp + " to " + path);
  }
}

CheckpointData ReadCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointIoError("checkpoint: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (in.bad()) throw CheckpointIoError("checkpoint: read failed for " + path);
  return DecodeCheckpoint(bytes);
}

CheckpointData PackTrainState(const TrainState& state, std::string config) {
  CheckpointData data;
  data.config = std::move(config);
  ForEachParam(state.model, [&](const std::string& name, const Tensor& t,
                                ParamRole, bool, bool) {
    data.tensors.push_back({name, t});
  });
  ForEachParam(state.velocity, [&](const std::string& name, const Tensor& t,
                                   ParamRole, bool, bool) {
    data.tensors.push_back({"velocity/" + name, t});
  });
  Tensor sched(1, 5);
  sched << state.scheduler.lr, state.scheduler.last_cv,
      static_cast<double>(state.scheduler.phase),
      static_cast<double>(state.scheduler.epochs),
      static_cast<double>(state.epoch);
  data.tensors.push_back({"train/scheduler", sched});
  Tensor history(static_cast<Index>(state.history.size()), 5);
  for (std::size_t i = 0; i < state.history.size(); ++i) {
    const EpochRecord& e = state.history[i];
    history.row(static_cast<Index>(i)) << static_cast<double>(e.epoch),
        e.train_loss, e.cv_loss, e.lr, e.seconds;
  }
  data.tensors.push_back({"train/history", history});
  data.rng = state.rng;
  return data;
}

TrainState UnpackTrainState(const CheckpointData& data,
                            std::span<const LayerSpec> specs) {
  std::map<std::string, const Tensor*> table;
  for (const NamedTensor& t : data.tensors) table[t.name] = &t.value;
  auto take = [&](const std::string& name, Index rows, Index cols) {
    auto it = table.find(name);
    if (it == table.end()) {
      throw CheckpointFormatError("checkpoint: missing tensor " + name);
    }
    if ((rows >= 0 && it->second->rows() != rows) ||
        it->second->cols() != cols) {
      throw CheckpointFormatError("checkpoint: tensor " + name + " has shape " +
                                  ShapeString(*it->second));
    }
    return *it->second;
  };

  TrainState state;
  Rng scratch(0);
  state.model = BuildModel(specs, scratch);
  state.velocity = ZerosLike(state.model);
  ForEachParam(state.model, [&](const std::string& name, Tensor& t, ParamRole,
                                bool, bool) {
    t = take(name, t.rows(), t.cols());
  });
  ForEachParam(state.velocity, [&](const std::string& name, Tensor& t,
                                   ParamRole, bool, bool) {
    t = take("velocity/" + name, t.rows(), t.cols());
  });
  const Tensor sched = take("train/scheduler", 1, 5);
  state.scheduler.lr = sched(0, 0);
  state.scheduler.last_cv = sched(0, 1);
  state.scheduler.phase = static_cast<SchedulerPhase>(static_cast<int>(sched(0, 2)));
  state.scheduler.epochs = static_cast<int>(sched(0, 3));
  state.epoch = static_cast<int>(sched(0, 4));
  const Tensor history = take("train/history", -1, 5);
  for (Index i = 0; i < history.rows(); ++i) {
    state.history.push_back({static_cast<int>(history(i, 0)), history(i, 1),
                             history(i, 2), history(i, 3), history(i, 4)});
  }
  state.rng = data.rng;
  return state;
}

TrainState checkpoint_roundtrip(const TrainState& state,
                                const std::string& path,
                                const std::string& config) {
  WriteCheckpoint(path, PackTrainState(state, config));
  return UnpackTrainState(ReadCheckpoint(path), state.model.specs);
}

}  // namespace stu
