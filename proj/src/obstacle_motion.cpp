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

#include "pushgrid/obstacle_motion.hpp"

namespace pushgrid {

Obstacle dynamic_obstacle_update(const Obstacle& obstacle, double dt,
                                 const Workspace& workspace) {
  Obstacle next = obstacle;
  next.body.pose.x += obstacle.velocity.x * dt;
  next.body.pose.y += obstacle.velocity.y * dt;
  const Aabb box = footprint(next.body).bounds();
  if (box.min.y <= workspace.origin.y && next.velocity.y < 0.0) {
    next.body.pose.y += 2.0 * (workspace.origin.y - box.min.y);
    next.velocity.y = -next.velocity.y;
  } else if (box.max.y >= workspace.y_max() && next.velocity.y > 0.0) {
    next.body.pose.y -= 2.0 * (box.max.y - workspace.y_max());
    next.velocity.y = -next.velocity.y;
  }
  return next;
}

}  // namespace pushgrid
