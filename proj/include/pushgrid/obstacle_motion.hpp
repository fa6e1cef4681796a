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

#ifndef PUSHGRID_OBSTACLE_MOTION_HPP_
#define PUSHGRID_OBSTACLE_MOTION_HPP_

#include "pushgrid/env.hpp"

namespace pushgrid {

// Advances a moving obstacle along y by velocity * dt. When its footprint
// reaches a y-edge of the workspace the velocity flips and the overshoot is
// mirrored back inside.
Obstacle dynamic_obstacle_update(const Obstacle& obstacle, double dt,
                                 const Workspace& workspace);

}  // namespace pushgrid

#endif  // PUSHGRID_OBSTACLE_MOTION_HPP_
