#pragma once

#include "parkvio/geom.hpp"

#include <array>
#include <cstdint>

namespace parkvio {

enum class Occupancy { kVacant, kOccupied };

// Rectangular ground marking. Corners are derived canonically from
// (center, heading, width, depth): heading points from the slot interior
// toward the aisle (the entrance side). Local frame: x along heading,
// y to its left. Corner order is fixed as
//   [front-left, front-right, back-right, back-left]
// and is preserved by the detector simulation, so slot orientation is
// unambiguous downstream.
struct ParkingSlot {
  int id = -1;
  Vec2 center{0, 0};
  double heading = 0.0;  // radians, world frame
  double width = 2.5;    // meters across the entrance
  double depth = 5.5;    // meters front-to-back
  Occupancy occupancy = Occupancy::kVacant;

  std::array<Vec2, 4> corners() const {
    const double c = std::cos(heading), s = std::sin(heading);
    const Mat2 R = (Mat2() << c, -s, s, c).finished();
    const std::array<Vec2, 4> local = {
        Vec2(depth / 2, width / 2), Vec2(depth / 2, -width / 2),
        Vec2(-depth / 2, -width / 2), Vec2(-depth / 2, width / 2)};
    std::array<Vec2, 4> out;
    for (int i = 0; i < 4; ++i) out[i] = center + R * local[i];
    return out;
  }
};

// One detector output. Body-frame corners are the authoritative geometry;
// pixel corners are consistent through the BEV affine map and may fall
// outside the image rectangle when a slot is only partially covered.
struct SlotObservation {
  double t = 0.0;
  std::array<Vec2, 4> corners_px;
  std::array<Vec2, 4> corners_body;
  Occupancy occupancy = Occupancy::kVacant;
  double confidence = 1.0;
  int gt_slot_id = -1;  // simulator bookkeeping for evaluation only
  int track_id = -1;    // filled in by the tracker

  Vec2 center_body() const {
    return 0.25 * (corners_body[0] + corners_body[1] + corners_body[2] + corners_body[3]);
  }
  Vec2 center_px() const {
    return 0.25 * (corners_px[0] + corners_px[1] + corners_px[2] + corners_px[3]);
  }
};

}  // namespace parkvio
