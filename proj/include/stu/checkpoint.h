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

// Binary checkpoint container. All integers little-endian:
//
//   magic      8 bytes  "STUCKPT\0"
//   version    u32      kCheckpointVersion
//   config     u64 length + UTF-8 bytes (normalised run config)
//   tensors    u32 count, then per tensor:
//                u32 name length + name bytes, u64 rows, u64 cols,
//                rows*cols IEEE-754 doubles (row-major)
//   rng        u64 seed, u64 counter
//   checksum   u32 CRC-32 of every preceding byte
//
// Training state beyond the model is stored as ordinary tensors under the
// "train/" and "velocity/" prefixes.

#ifndef STU_CHECKPOINT_H_
#define STU_CHECKPOINT_H_

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "stu/core.h"
#include "stu/training.h"

namespace stu {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class CheckpointVersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class CheckpointChecksumError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class CheckpointFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NamedTensor {
  std::string name;
  Tensor value;
};

struct CheckpointData {
  std::string config;
  std::vector<NamedTensor> tensors;
  Rng rng;
};

std::string EncodeCheckpoint(const CheckpointData& data);
CheckpointData DecodeCheckpoint(const std::string& bytes);

// Atomic: writes `path`.tmp, then renames over `path`.
void WriteCheckpoint(const std::string& path, const CheckpointData& data);
CheckpointData ReadCheckpoint(const std::string& path);

CheckpointData PackTrainState(const TrainState& state, std::string config);
// `specs` must describe the model the checkpoint was taken from.
TrainState UnpackTrainState(const CheckpointData& data,
                            std::span<const LayerSpec> specs);

// Save then load.
TrainState checkpoint_roundtrip(const TrainState& state,
                                const std::string& path,
                                const std::string& config = "");

}  // namespace stu

#endif  // STU_CHECKPOINT_H_
