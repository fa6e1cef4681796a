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

#include "pushgrid/extractors.hpp"

#include <map>
#include <unordered_map>

#include "pushgrid/error.hpp"

namespace pushgrid {
namespace {

const std::vector<int> kEmbedSizes{192, 128};
const std::vector<int> kPatchMlpSizes{128, 100, 64};
const std::vector<int> kCompressSizes{2048, 512, 64};
constexpr int kEmbedSize = 128;

struct PatchKeyHash {
  std::size_t operator()(const PatchKey& k) const {
    std::uint64_t h = k[0];
    for (int i = 1; i < 4; ++i) h = h * 0x9e3779b97f4a7c15ULL ^ k[i];
    return static_cast<std::size_t>(h ^ (h >> 29));
  }
};

int checked_patch_count(std::span<const ExtractorInput> batch) {
  if (batch.empty()) throw ShapeMismatch("extractor called on an empty batch");
  const int p = batch[0].patches ? batch[0].patches->size() : 0;
  for (const ExtractorInput& in : batch) {
    if (!in.patches || in.patches->size() != p || p == 0) {
      throw ShapeMismatch("extractor batch needs patch sets of equal size");
    }
  }
  return p;
}

// Embeds every distinct patch once. Returns the unique embeddings and, for
// each (sample, patch), the row of its embedding.
std::pair<Var, std::vector<int>> embed_unique(
    Tape& tape, Mlp& embed, std::span<const ExtractorInput> batch, int patches) {
  std::unordered_map<PatchKey, int, PatchKeyHash> rows;
  std::vector<int> index;
  index.reserve(batch.size() * patches);
  std::vector<const std::uint8_t*> sources;
  for (const ExtractorInput& in : batch) {
    for (int i = 0; i < patches; ++i) {
      auto [it, fresh] =
          rows.try_emplace(in.patches->keys[i], static_cast<int>(sources.size()));
      if (fresh) sources.push_back(in.patches->patch(i).data());
      index.push_back(it->second);
    }
  }
  Matrix cells(static_cast<Eigen::Index>(sources.size()), kPatchCells);
  for (std::size_t r = 0; r < sources.size(); ++r) {
    for (int c = 0; c < kPatchCells; ++c) {
      cells(static_cast<Eigen::Index>(r), c) = sources[r][c];
    }
  }
  return {embed.forward(tape, tape.constant(std::move(cells))), std::move(index)};
}

Matrix contexts(std::span<const ExtractorInput> batch, int patches) {
  Matrix ctx(static_cast<Eigen::Index>(batch.size()) * patches, kContextSize);
  Eigen::Index r = 0;
  for (const ExtractorInput& in : batch) {
    for (int i = 0; i < patches; ++i, ++r) {
      const Vec2 o = in.patches->origins[i];
      ctx.row(r) << in.object.x - o.x, in.object.y - o.y, in.target.x - o.x,
          in.target.y - o.y;
    }
  }
  return ctx;
}

// mlp(concat(embedding, context)) with the first layer split so that the
// embedding half is multiplied once per distinct patch.
Var patch_mlp(Tape& tape, Mlp& mlp, Var unique_embeddings,
              const std::vector<int>& index, Var ctx) {
  std::vector<Linear>& layers = mlp.layers();
  Var w = tape.param(layers[0].weight());
  Var from_embedding =
      ad::matmul(unique_embeddings, ad::slice_rows(w, 0, kEmbedSize));
  Var from_context = ad::linear(ctx, ad::slice_rows(w, kEmbedSize, kContextSize),
                                tape.param(layers[0].bias()));
  Var x = ad::tanh(ad::add(ad::gather_rows(from_embedding, index), from_context));
  for (std::size_t i = 1; i < layers.size(); ++i) {
    x = ad::tanh(layers[i].forward(tape, x));
  }
  return x;
}

nlohmann::json mlp_sizes(const Mlp& mlp) {
  nlohmann::json sizes = nlohmann::json::array();
  sizes.push_back(mlp.in_features());
  for (const Linear& l : mlp.layers()) sizes.push_back(l.out_features());
  return sizes;
}

}  // namespace

const char* to_string(ExtractorKind kind) {
  switch (kind) {
    case ExtractorKind::kAttention:
      return "attention";
    case ExtractorKind::kCnn:
      return "cnn";
    case ExtractorKind::kMlp:
      return "mlp";
  }
  return "unknown";
}

ExtractorKind extractor_kind_from_string(std::string_view name) {
  if (name == "attention") return ExtractorKind::kAttention;
  if (name == "cnn") return ExtractorKind::kCnn;
  if (name == "mlp") return ExtractorKind::kMlp;
  throw ConfigError("extractor", "unknown extractor '" + std::string(name) +
                                     "' (expected attention, cnn or mlp)");
}

AttentionExtractor::AttentionExtractor(const GridShape& shape, Rng& rng)
    : shape_(shape),
      embed_(kPatchCells, kEmbedSizes, rng),
      feature_(kEmbedSize + kContextSize, kPatchMlpSizes, rng),
      score_(kEmbedSize + kContextSize, kPatchMlpSizes, rng),
      score_head_(kPatchMlpSizes.back(), 1, 1.0, rng) {}

AttentionExtractor::Detail AttentionExtractor::forward_detail(
    Tape& tape, std::span<const ExtractorInput> batch) {
  const int p = checked_patch_count(batch);
  auto [unique, index] = embed_unique(tape, embed_, batch, p);
  Var ctx = tape.constant(contexts(batch, p));
  Var features = patch_mlp(tape, feature_, unique, index, ctx);
  Var scores = score_head_.forward(tape, patch_mlp(tape, score_, unique, index, ctx));
  Var weights = ad::softmax_rows(
      ad::reshape(scores, static_cast<Eigen::Index>(batch.size()), p));
  return {ad::weighted_group_sum(weights, features), weights, features};
}

Var AttentionExtractor::forward(Tape& tape,
                                std::span<const ExtractorInput> batch) {
  return forward_detail(tape, batch).output;
}

void AttentionExtractor::collect(ParamList& out, const std::string& prefix) {
  embed_.collect(out, prefix + ".embed");
  feature_.collect(out, prefix + ".feature");
  score_.collect(out, prefix + ".score");
  score_head_.collect(out, prefix + ".score_head");
}

nlohmann::json AttentionExtractor::describe() const {
  return {{"kind", "attention"},
          {"embed", mlp_sizes(embed_)},
          {"feature", mlp_sizes(feature_)},
          {"score", mlp_sizes(score_)},
          {"grid", {shape_.rows, shape_.cols}}};
}

CnnExtractor::CnnExtractor(const GridShape& shape, Rng& rng) : shape_(shape) {
  const int channels[] = {16, 32, 32};
  const int strides[] = {3, 2, 2};
  int c = 1, h = shape.padded_rows(), w = shape.padded_cols();
  for (int i = 0; i < 3; ++i) {
    const ad::ConvShape s{c, h, w, 5, strides[i]};
    if (s.out_height() < 1 || s.out_width() < 1) {
      throw ShapeMismatch("grid too small for the CNN extractor");
    }
    convs_.emplace_back(s, channels[i], std::sqrt(2.0), rng);
    c = channels[i];
    h = s.out_height();
    w = s.out_width();
  }
  out_ = Linear(c * h * w, kFeatureSize, std::sqrt(2.0), rng);
}

Var CnnExtractor::forward(Tape& tape, std::span<const ExtractorInput> batch) {
  if (batch.empty()) throw ShapeMismatch("extractor called on an empty batch");
  const int rows = shape_.padded_rows(), cols = shape_.padded_cols();
  // Grids are shared between steps of an episode; convolve each once.
  std::map<const OccupancyGrid*, int> unique;
  std::vector<int> index;
  std::vector<const OccupancyGrid*> sources;
  for (const ExtractorInput& in : batch) {
    if (!in.grid) throw ShapeMismatch("CNN extractor needs the grid");
    auto [it, fresh] =
        unique.try_emplace(in.grid.get(), static_cast<int>(sources.size()));
    if (fresh) sources.push_back(in.grid.get());
    index.push_back(it->second);
  }
  Matrix x = Matrix::Zero(static_cast<Eigen::Index>(sources.size()),
                          static_cast<Eigen::Index>(rows) * cols);
  for (std::size_t s = 0; s < sources.size(); ++s) {
    const OccupancyGrid& g = *sources[s];
    if (g.rows > rows || g.cols > cols) {
      throw ShapeMismatch("grid larger than the CNN input");
    }
    // Zero padding on the right and bottom, as for patches.
    for (int r = 0; r < g.rows; ++r) {
      for (int c = 0; c < g.cols; ++c) {
        x(static_cast<Eigen::Index>(s), r * cols + c) = g.at(r, c);
      }
    }
  }
  Var h = tape.constant(std::move(x));
  for (Conv2d& conv : convs_) h = ad::tanh(conv.forward(tape, h));
  Var features = ad::tanh(out_.forward(tape, h));
  return ad::gather_rows(features, std::move(index));
}

void CnnExtractor::collect(ParamList& out, const std::string& prefix) {
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    convs_[i].collect(out, prefix + ".conv" + std::to_string(i));
  }
  out_.collect(out, prefix + ".out");
}

nlohmann::json CnnExtractor::describe() const {
  nlohmann::json convs = nlohmann::json::array();
  for (const Conv2d& c : convs_) {
    convs.push_back({{"channels", c.out_channels()},
                     {"kernel", c.shape().kernel},
                     {"stride", c.shape().stride}});
  }
  return {{"kind", "cnn"},
          {"convs", convs},
          {"out", kFeatureSize},
          {"grid", {shape_.rows, shape_.cols}}};
}

MlpExtractor::MlpExtractor(const GridShape& shape, Rng& rng)
    : shape_(shape),
      embed_(kPatchCells, kEmbedSizes, rng),
      feature_(kEmbedSize + kContextSize, kPatchMlpSizes, rng),
      compress_(shape.patch_count() * kPatchMlpSizes.back(), kCompressSizes,
                rng) {}

Var MlpExtractor::forward(Tape& tape, std::span<const ExtractorInput> batch) {
  const int p = checked_patch_count(batch);
  if (p != shape_.patch_count()) {
    throw ShapeMismatch("MLP extractor built for " +
                        std::to_string(shape_.patch_count()) + " patches, got " +
                        std::to_string(p));
  }
  auto [unique, index] = embed_unique(tape, embed_, batch, p);
  Var ctx = tape.constant(contexts(batch, p));
  Var features = patch_mlp(tape, feature_, unique, index, ctx);
  Var flat = ad::reshape(features, static_cast<Eigen::Index>(batch.size()),
                         static_cast<Eigen::Index>(p) * kPatchMlpSizes.back());
  return compress_.forward(tape, flat);
}

void MlpExtractor::collect(ParamList& out, const std::string& prefix) {
  embed_.collect(out, prefix + ".embed");
  feature_.collect(out, prefix + ".feature");
  compress_.collect(out, prefix + ".compress");
}

nlohmann::json MlpExtractor::describe() const {
  return {{"kind", "mlp"},
          {"embed", mlp_sizes(embed_)},
          {"feature", mlp_sizes(feature_)},
          {"compress", mlp_sizes(compress_)},
          {"grid", {shape_.rows, shape_.cols}}};
}

std::unique_ptr<Extractor> make_extractor(ExtractorKind kind,
                                          const GridShape& shape, Rng& rng) {
  switch (kind) {
    case ExtractorKind::kAttention:
      return std::make_unique<AttentionExtractor>(shape, rng);
    case ExtractorKind::kCnn:
      return std::make_unique<CnnExtractor>(shape, rng);
    case ExtractorKind::kMlp:
      return std::make_unique<MlpExtractor>(shape, rng);
  }
  throw ConfigError("extractor", "unknown extractor kind");
}

std::size_t extractor_parameter_count(ExtractorKind kind,
                                      const GridShape& shape) {
  Rng rng(0);
  auto e = make_extractor(kind, shape, rng);
  ParamList params;
  e->collect(params, "x");
  return count_parameters(params);
}

}  // namespace pushgrid
