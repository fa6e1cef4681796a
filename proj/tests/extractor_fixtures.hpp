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

// Random extractor inputs and checks shared by the unit tests and the
// acceptance run.
#ifndef PUSHGRID_TESTS_EXTRACTOR_FIXTURES_HPP_
#define PUSHGRID_TESTS_EXTRACTOR_FIXTURES_HPP_

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include "gradcheck.hpp"
#include "gradient_suites.hpp"
#include "oracles.hpp"
#include "pushgrid/extractors.hpp"

namespace pushgrid::oracle {

inline const GridShape kTableGrid{};  // 100 x 140

inline ExtractorInput make_input(const OccupancyGrid& grid, Vec2 object, Vec2 target) {
  auto g = std::make_shared<const OccupancyGrid>(grid);
  return {std::make_shared<const PatchSet>(decompose_patches(grid)), g, object,
          target};
}

inline ExtractorInput random_input(std::mt19937_64& rng, const GridShape& shape = kTableGrid) {
  const Workspace ws = Workspace::from_grid(shape.rows, shape.cols, kGridResolution);
  OccupancyGrid grid = rasterize(oracle::random_scene(rng, ws), ws);
  // Sprinkle isolated cells so most patches are distinct.
  std::bernoulli_distribution speck(0.02);
  for (auto& c : grid.cells) c = c | static_cast<std::uint8_t>(speck(rng));
  std::uniform_real_distribution<double> ux(0.0, ws.width), uy(0.0, ws.height);
  return make_input(grid, {ux(rng), uy(rng)}, {ux(rng), uy(rng)});
}

inline void randomize_biases(const ParamList& params, Rng& rng) {
  for (const auto& [name, p] : params) {
    if (name.ends_with("bias")) p->value = random_matrix(1, p->value.cols(), rng, 0.2);
  }
}

// The same observation with its patches listed in `order`.
inline ExtractorInput permuted(const ExtractorInput& in, const std::vector<int>& order) {
  PatchSet p = *in.patches;
  for (std::size_t i = 0; i < order.size(); ++i) {
    std::copy_n(in.patches->patch(order[i]).begin(), kPatchCells,
                p.cells.begin() + static_cast<std::ptrdiff_t>(i) * kPatchCells);
    p.origins[i] = in.patches->origins[order[i]];
    p.keys[i] = in.patches->keys[order[i]];
  }
  return {std::make_shared<const PatchSet>(std::move(p)), in.grid, in.object,
          in.target};
}

// Gradient check over `instances` random parameterizations of one
// extractor; weights are redrawn with unit-variance fan-in scaling.
inline double extractor_gradient_error(ExtractorKind kind, std::uint64_t seed,
                                       int per_param, int batch_size,
                                       int instances = kGradInstances) {
  std::mt19937_64 rng(seed);
  Rng prng(seed);
  auto ex = make_extractor(kind, kTableGrid, prng);
  ParamList params;
  ex->collect(params, "x");
  double worst = 0.0;
  for (int i = 0; i < instances; ++i) {
    for (const auto& [name, p] : params) {
      const double fan_in = name.ends_with("bias") ? 25.0 : static_cast<double>(p->value.rows());
      p->value = random_matrix(p->value.rows(), p->value.cols(), prng,
                               std::sqrt(3.0 / fan_in));
    }
    std::vector<ExtractorInput> batch;
    for (int b = 0; b < batch_size; ++b) batch.push_back(random_input(rng));
    const Matrix proj = random_matrix(batch_size, kFeatureSize, prng);
    worst = std::max(worst, max_gradient_error(params, [&](Tape& t) {
      return ad::sum(ad::mul(ex->forward(t, batch), t.constant(proj)));
    }, prng, per_param));
  }
  return worst;
}

}  // namespace pushgrid::oracle

#endif  // PUSHGRID_TESTS_EXTRACTOR_FIXTURES_HPP_
