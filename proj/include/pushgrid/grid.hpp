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

#ifndef PUSHGRID_GRID_HPP_
#define PUSHGRID_GRID_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pushgrid/geometry.hpp"

namespace pushgrid {

inline constexpr double kGridResolution = 0.005;  // meters per cell
inline constexpr int kPatchSize = 16;
inline constexpr int kPatchCells = kPatchSize * kPatchSize;

// Binary workspace map. Row 0 is the top edge (largest y), column 0 the left
// edge (smallest x); 1 marks an obstacle.
struct OccupancyGrid {
  int rows = 0;
  int cols = 0;
  double resolution = kGridResolution;
  Vec2 origin;  // workspace lower-left corner
  std::vector<std::uint8_t> cells;

  static OccupancyGrid zeros(int rows, int cols,
                             double resolution = kGridResolution,
                             Vec2 origin = {});

  std::uint8_t at(int row, int col) const { return cells[row * cols + col]; }
  std::uint8_t& at(int row, int col) { return cells[row * cols + col]; }
  Vec2 cell_center(int row, int col) const {
    return {origin.x + (col + 0.5) * resolution,
            origin.y + (rows - row - 0.5) * resolution};
  }
  Workspace workspace() const {
    return Workspace::from_grid(rows, cols, resolution, origin);
  }
  std::size_t occupied() const;
  friend bool operator==(const OccupancyGrid&, const OccupancyGrid&) = default;
};

// Fixed-size content fingerprint of one 16x16 patch (one bit per cell).
using PatchKey = std::array<std::uint64_t, 4>;

struct PatchSet {
  int patch_rows = 0;  // patches along the grid's row axis
  int patch_cols = 0;
  // n * 256 cells, patch-major; within a patch row-major.
  std::vector<std::uint8_t> cells;
  // Workspace coordinates of each patch's upper-left corner.
  std::vector<Vec2> origins;
  std::vector<PatchKey> keys;

  int size() const { return patch_rows * patch_cols; }
  std::span<const std::uint8_t> patch(int i) const {
    return {cells.data() + static_cast<std::size_t>(i) * kPatchCells,
            static_cast<std::size_t>(kPatchCells)};
  }
};

// Marks every cell whose center lies inside an obstacle footprint.
// Throws InvalidInput for a non-finite pose or non-positive resolution.
OccupancyGrid rasterize(std::span<const PlacedShape> obstacles,
                        const Workspace& workspace,
                        double resolution = kGridResolution);

// Zero-pads to multiples of 16 on the right and bottom and cuts row-major
// 16x16 patches. A 100x140 grid becomes 7x9 = 63 patches.
PatchSet decompose_patches(const OccupancyGrid& grid);

// Inverse of decompose_patches with the padding dropped.
OccupancyGrid reassemble(const PatchSet& patches, int rows, int cols,
                         double resolution, Vec2 origin);

// Grid padded with zeros to the patch multiple, as the CNN consumes it.
OccupancyGrid pad_to_patches(const OccupancyGrid& grid);

PatchKey patch_key(std::span<const std::uint8_t> patch);

// Binary PGM (P5); obstacles black, free space white.
void write_pgm(const OccupancyGrid& grid, const std::filesystem::path& path);

}  // namespace pushgrid

#endif  // PUSHGRID_GRID_HPP_
