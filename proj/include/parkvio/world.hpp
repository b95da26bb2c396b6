#pragma once

#include "parkvio/geom.hpp"
#include "parkvio/rng.hpp"
#include "parkvio/slots.hpp"

#include <stdexcept>
#include <vector>

namespace parkvio {

struct Landmark {
  int id = -1;
  Vec3 position{0, 0, 0};  // world frame, meters
};

struct WorldSpec {
  double width = 60.0;   // lot bounds [0, width] x [0, height]
  double height = 36.0;
  int slot_count = 60;
  double slot_width = 2.5;
  double slot_depth = 5.5;
  double aisle_width = 5.0;
  double occupied_fraction = 0.5;
  int landmark_count = 350;
  double wall_height = 2.8;
};

struct ParkingLotWorld {
  WorldSpec spec;
  std::vector<ParkingSlot> slots;
  std::vector<Landmark> landmarks;

  // y coordinates of aisle centerlines, ordered bottom to top. Trajectory
  // generation anchors paths to these.
  std::vector<double> aisle_centers;
};

namespace detail {

// Slot banks come in facing pairs separated by an aisle:
//   [slots opening +y][aisle][slots opening -y]
// stacked upward until the lot height is exhausted.
struct BankLayout {
  std::vector<std::pair<double, double>> banks;  // (center y of slot row, heading)
  std::vector<double> aisle_centers;
};

inline BankLayout plan_banks(const WorldSpec& s) {
  BankLayout out;
  const double margin = 1.0;
  const double unit = 2.0 * s.slot_depth + s.aisle_width;
  double y = margin;
  while (y + unit <= s.height - margin) {
    const double low_row = y + 0.5 * s.slot_depth;
    const double aisle = y + s.slot_depth + 0.5 * s.aisle_width;
    const double high_row = y + 1.5 * s.slot_depth + s.aisle_width;
    out.banks.emplace_back(low_row, M_PI / 2.0);    // opens +y toward the aisle
    out.banks.emplace_back(high_row, -M_PI / 2.0);  // opens -y
    out.aisle_centers.push_back(aisle);
    y += unit + 1.0;
  }
  return out;
}

}  // namespace detail

inline ParkingLotWorld generate_world(const WorldSpec& spec, uint64_t seed) {
  if (spec.slot_count < 1) throw std::invalid_argument("generate_world: slot_count must be >= 1");
  if (spec.width <= 0 || spec.height <= 0)
    throw std::invalid_argument("generate_world: bounds must be positive");

  const auto layout = detail::plan_banks(spec);
  const double margin = 1.0;
  const double line_gap = 0.1;  // painted line between adjacent slots
  const double pitch = spec.slot_width + line_gap;
  const int per_bank = static_cast<int>((spec.width - 2 * margin + line_gap) / pitch);
  const int capacity = per_bank * static_cast<int>(layout.banks.size());
  if (spec.slot_count > capacity)
    throw std::invalid_argument("generate_world: infeasible packing, capacity " +
                                std::to_string(capacity) + " < requested " +
                                std::to_string(spec.slot_count));

  ParkingLotWorld world;
  world.spec = spec;
  world.aisle_centers = layout.aisle_centers;

  Rng occ_rng(seed, 11);
  int placed = 0;
  for (const auto& [row_y, heading] : layout.banks) {
    for (int i = 0; i < per_bank && placed < spec.slot_count; ++i, ++placed) {
      ParkingSlot slot;
      slot.id = placed;
      slot.center = Vec2(margin + i * pitch + 0.5 * spec.slot_width, row_y);
      slot.heading = heading;
      slot.width = spec.slot_width;
      slot.depth = spec.slot_depth;
      slot.occupancy = occ_rng.bernoulli(spec.occupied_fraction) ? Occupancy::kOccupied
                                                                 : Occupancy::kVacant;
      world.slots.push_back(slot);
    }
  }

  // Visual landmarks: wall points around the perimeter plus pillar clusters
  // along the slot row backs, at heights a camera would see.
  Rng lm_rng(seed, 12);
  world.landmarks.reserve(spec.landmark_count);
  int lm_id = 0;
  const double perimeter = 2.0 * (spec.width + spec.height);
  const int wall_points = (2 * spec.landmark_count) / 3;
  for (int i = 0; i < wall_points; ++i) {
    double s = perimeter * lm_rng.uniform();
    double h = lm_rng.uniform(0.2, spec.wall_height);
    Vec3 p;
    if (s < spec.width) p = Vec3(s, 0.0, h);
    else if (s < spec.width + spec.height) p = Vec3(spec.width, s - spec.width, h);
    else if (s < 2 * spec.width + spec.height) p = Vec3(s - spec.width - spec.height, spec.height, h);
    else p = Vec3(0.0, s - 2 * spec.width - spec.height, h);
    world.landmarks.push_back({lm_id++, p});
  }
  // pillars: vertical point stacks on a coarse interior grid
  const int remaining = spec.landmark_count - wall_points;
  const int pillar_cols = 7;
  const int pillar_rows = 3;
  const int per_pillar = std::max(1, remaining / (pillar_cols * pillar_rows));
  for (int cx = 0; cx < pillar_cols && lm_id < spec.landmark_count; ++cx) {
    for (int cy = 0; cy < pillar_rows && lm_id < spec.landmark_count; ++cy) {
      const Vec2 base((cx + 0.5) * spec.width / pillar_cols,
                      (cy + 0.5) * spec.height / pillar_rows);
      for (int k = 0; k < per_pillar && lm_id < spec.landmark_count; ++k) {
        world.landmarks.push_back(
            {lm_id++, Vec3(base.x() + lm_rng.normal(0, 0.15), base.y() + lm_rng.normal(0, 0.15),
                           lm_rng.uniform(0.2, spec.wall_height))});
      }
    }
  }
  while (lm_id < spec.landmark_count) {
    world.landmarks.push_back({lm_id++, Vec3(lm_rng.uniform(1.0, spec.width - 1.0),
                                             lm_rng.uniform(1.0, spec.height - 1.0),
                                             lm_rng.uniform(0.2, spec.wall_height))});
  }
  return world;
}

}  // namespace parkvio
