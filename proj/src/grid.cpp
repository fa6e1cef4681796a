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

#include "pushgrid/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "pushgrid/error.hpp"

namespace pushgrid {

OccupancyGrid OccupancyGrid::zeros(int rows, int cols, double resolution,
                                   Vec2 origin) {
  return OccupancyGrid{rows, cols, resolution, origin,
                       std::vector<std::uint8_t>(
                           static_cast<std::size_t>(rows) * cols, 0)};
}

std::size_t OccupancyGrid::occupied() const {
  return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), 1));
}

OccupancyGrid rasterize(std::span<const PlacedShape> obstacles,
                        const Workspace& workspace, double resolution) {
  if (!(resolution > 0.0)) throw InvalidInput("resolution must be positive");
  const int cols = static_cast<int>(std::lround(workspace.width / resolution));
  const int rows = static_cast<int>(std::lround(workspace.height / resolution));
  if (std::abs(cols * resolution - workspace.width) > 1e-9 ||
      std::abs(rows * resolution - workspace.height) > 1e-9) {
    throw InvalidInput("workspace size is not a multiple of the resolution");
  }
  OccupancyGrid grid = OccupancyGrid::zeros(rows, cols, resolution,
                                            workspace.origin);
  for (const PlacedShape& obstacle : obstacles) {
    const Footprint shape = footprint(obstacle);
    const Aabb box = shape.bounds();
    // Cell index ranges whose centers can fall inside the bounding box.
    const auto col_of = [&](double x) {
      return (x - workspace.origin.x) / resolution - 0.5;
    };
    const auto row_of = [&](double y) {
      return rows - 0.5 - (y - workspace.origin.y) / resolution;
    };
    const int c0 = std::max(0, static_cast<int>(std::floor(col_of(box.min.x))));
    const int c1 =
        std::min(cols - 1, static_cast<int>(std::ceil(col_of(box.max.x))));
    const int r0 = std::max(0, static_cast<int>(std::floor(row_of(box.max.y))));
    const int r1 =
        std::min(rows - 1, static_cast<int>(std::ceil(row_of(box.min.y))));
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        if (grid.at(r, c) == 0 && contains(shape, grid.cell_center(r, c))) {
          grid.at(r, c) = 1;
        }
      }
    }
  }
  return grid;
}

PatchKey patch_key(std::span<const std::uint8_t> patch) {
  PatchKey key{};
  for (std::size_t i = 0; i < patch.size(); ++i) {
    if (patch[i]) key[i / 64] |= std::uint64_t{1} << (i % 64);
  }
  return key;
}

PatchSet decompose_patches(const OccupancyGrid& grid) {
  PatchSet set;
  set.patch_rows = (grid.rows + kPatchSize - 1) / kPatchSize;
  set.patch_cols = (grid.cols + kPatchSize - 1) / kPatchSize;
  const int n = set.size();
  set.cells.assign(static_cast<std::size_t>(n) * kPatchCells, 0);
  set.origins.reserve(n);
  set.keys.reserve(n);
  const double top = grid.origin.y + grid.rows * grid.resolution;
  for (int pr = 0; pr < set.patch_rows; ++pr) {
    for (int pc = 0; pc < set.patch_cols; ++pc) {
      const int index = pr * set.patch_cols + pc;
      std::uint8_t* out =
          set.cells.data() + static_cast<std::size_t>(index) * kPatchCells;
      for (int r = 0; r < kPatchSize; ++r) {
        const int gr = pr * kPatchSize + r;
        if (gr >= grid.rows) break;
        for (int c = 0; c < kPatchSize; ++c) {
          const int gc = pc * kPatchSize + c;
          if (gc >= grid.cols) break;
          out[r * kPatchSize + c] = grid.at(gr, gc);
        }
      }
      set.origins.push_back(
          {grid.origin.x + pc * kPatchSize * grid.resolution,
           top - pr * kPatchSize * grid.resolution});
      set.keys.push_back(patch_key(set.patch(index)));
    }
  }
  return set;
}

OccupancyGrid reassemble(const PatchSet& patches, int rows, int cols,
                         double resolution, Vec2 origin) {
  OccupancyGrid grid = OccupancyGrid::zeros(rows, cols, resolution, origin);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int index = (r / kPatchSize) * patches.patch_cols + c / kPatchSize;
      grid.at(r, c) =
          patches.patch(index)[(r % kPatchSize) * kPatchSize + c % kPatchSize];
    }
  }
  return grid;
}

OccupancyGrid pad_to_patches(const OccupancyGrid& grid) {
  const int rows = (grid.rows + kPatchSize - 1) / kPatchSize * kPatchSize;
  const int cols = (grid.cols + kPatchSize - 1) / kPatchSize * kPatchSize;
  // The padded rows extend below the workspace, so the origin moves down.
  OccupancyGrid padded = OccupancyGrid::zeros(
      rows, cols, grid.resolution,
      {grid.origin.x, grid.origin.y - (rows - grid.rows) * grid.resolution});
  for (int r = 0; r < grid.rows; ++r) {
    std::copy_n(grid.cells.begin() + static_cast<std::ptrdiff_t>(r) * grid.cols,
                grid.cols,
                padded.cells.begin() + static_cast<std::ptrdiff_t>(r) * cols);
  }
  return padded;
}

void write_pgm(const OccupancyGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << "P5\n" << grid.cols << ' ' << grid.rows << "\n255\n";
  std::vector<char> pixels(grid.cells.size());
  std::transform(grid.cells.begin(), grid.cells.end(), pixels.begin(),
                 [](std::uint8_t v) { return static_cast<char>(v ? 0 : 255); });
  out.write(pixels.data(), static_cast<std::streamsize>(pixels.size()));
  if (!out) throw FormatError("failed writing " + path.string());
}

}  // namespace pushgrid
