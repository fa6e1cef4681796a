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

#ifndef PUSHGRID_EXTRACTORS_HPP_
#define PUSHGRID_EXTRACTORS_HPP_

#include <memory>
#include <span>
#include <string>
#include <string_view>

#include "json.hpp"
#include "pushgrid/autodiff.hpp"
#include "pushgrid/grid.hpp"
#include "pushgrid/layers.hpp"

namespace pushgrid {

inline constexpr int kFeatureSize = 64;
inline constexpr int kContextSize = 4;  // object x, y and target x, y

enum class ExtractorKind { kAttention, kCnn, kMlp };
const char* to_string(ExtractorKind kind);
// Throws ConfigError("extractor", ...) for unknown names.
ExtractorKind extractor_kind_from_string(std::string_view name);

struct ExtractorInput {
  std::shared_ptr<const PatchSet> patches;
  std::shared_ptr<const OccupancyGrid> grid;
  Vec2 object;  // meters, workspace frame
  Vec2 target;
};

// Grid size the extractor is built for; patch count and CNN input follow
// from it after padding to the patch multiple.
struct GridShape {
  int rows = 100;
  int cols = 140;
  int padded_rows() const { return (rows + kPatchSize - 1) / kPatchSize * kPatchSize; }
  int padded_cols() const { return (cols + kPatchSize - 1) / kPatchSize * kPatchSize; }
  int patch_count() const {
    return padded_rows() / kPatchSize * (padded_cols() / kPatchSize);
  }
};

class Extractor {
 public:
  virtual ~Extractor() = default;
  virtual ExtractorKind kind() const = 0;
  // B x 64 features for a batch of observations.
  virtual Var forward(Tape& tape, std::span<const ExtractorInput> batch) = 0;
  virtual void collect(ParamList& out, const std::string& prefix) = 0;
  // Architecture summary stored in checkpoints and compared on load.
  virtual nlohmann::json describe() const = 0;
};

// Location-based attention over 16x16 patches. Each patch is embedded
// (256 -> 192 -> 128), joined with the object and target positions relative
// to the patch's upper-left corner, then mapped to a feature (-> 128 -> 100
// -> 64) and, by a second MLP of the same shape plus a linear 64 -> 1 head,
// to a score. Output is the softmax(score)-weighted sum of features.
class AttentionExtractor : public Extractor {
 public:
  AttentionExtractor(const GridShape& shape, Rng& rng);

  ExtractorKind kind() const override { return ExtractorKind::kAttention; }
  Var forward(Tape& tape, std::span<const ExtractorInput> batch) override;
  void collect(ParamList& out, const std::string& prefix) override;
  nlohmann::json describe() const override;

  struct Detail {
    Var output;    // B x 64
    Var weights;   // B x P
    Var features;  // (B*P) x 64
  };
  Detail forward_detail(Tape& tape, std::span<const ExtractorInput> batch);

  Mlp& embed() { return embed_; }
  Mlp& feature() { return feature_; }
  Mlp& score() { return score_; }
  Linear& score_head() { return score_head_; }

 private:
  GridShape shape_;
  Mlp embed_;
  Mlp feature_;
  Mlp score_;
  Linear score_head_;
};

// Three valid convolutions (16, 32, 32 channels, 5x5, strides 3, 2, 2) over
// the padded grid, then a linear map to 64.
class CnnExtractor : public Extractor {
 public:
  CnnExtractor(const GridShape& shape, Rng& rng);

  ExtractorKind kind() const override { return ExtractorKind::kCnn; }
  Var forward(Tape& tape, std::span<const ExtractorInput> batch) override;
  void collect(ParamList& out, const std::string& prefix) override;
  nlohmann::json describe() const override;

 private:
  GridShape shape_;
  std::vector<Conv2d> convs_;
  Linear out_;
};

// Ablation without attention: per-patch features as in the attention
// extractor, concatenated in patch order and compressed by an MLP
// (2048, 512, 64).
class MlpExtractor : public Extractor {
 public:
  MlpExtractor(const GridShape& shape, Rng& rng);

  ExtractorKind kind() const override { return ExtractorKind::kMlp; }
  Var forward(Tape& tape, std::span<const ExtractorInput> batch) override;
  void collect(ParamList& out, const std::string& prefix) override;
  nlohmann::json describe() const override;

  Mlp& embed() { return embed_; }
  Mlp& feature() { return feature_; }
  Mlp& compress() { return compress_; }

 private:
  GridShape shape_;
  Mlp embed_;
  Mlp feature_;
  Mlp compress_;
};

std::unique_ptr<Extractor> make_extractor(ExtractorKind kind,
                                          const GridShape& shape, Rng& rng);

// Parameter count of a freshly built extractor of the given kind.
std::size_t extractor_parameter_count(ExtractorKind kind,
                                      const GridShape& shape = {});

}  // namespace pushgrid

#endif  // PUSHGRID_EXTRACTORS_HPP_
