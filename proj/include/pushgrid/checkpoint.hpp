// Copyright 2026 The pushgrid Authors
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

#ifndef PUSHGRID_CHECKPOINT_HPP_
#define PUSHGRID_CHECKPOINT_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "pushgrid/autodiff.hpp"

namespace pushgrid {

// Binary container: magic, format version, a JSON header, then named
// tensors as raw little-endian doubles and a checksum over everything
// before it. Values round-trip bit for bit.
struct CheckpointData {
  nlohmann::json header;
  std::vector<std::pair<std::string, Matrix>> tensors;

  const Matrix& tensor(const std::string& name) const;
};

inline constexpr int kCheckpointVersion = 1;

// Writes to a temporary file and renames it into place so that an
// interrupted write never replaces a good checkpoint.
void write_checkpoint(const std::filesystem::path& path,
                      const CheckpointData& data);
// Throws FormatError for missing, truncated or corrupt files.
CheckpointData read_checkpoint(const std::filesystem::path& path);

}  // namespace pushgrid

#endif  // PUSHGRID_CHECKPOINT_HPP_
