#pragma once

#include <cstddef>
#include <vector>

#include "vpfp/errors.hpp"
#include "vpfp/vec3.hpp"

namespace vpfp {

/// Positions and velocities of N particles.
struct PhaseState {
  std::vector<Vec3> positions;
  std::vector<Vec3> velocities;

  PhaseState() = default;
  explicit PhaseState(std::size_t n) : positions(n), velocities(n) {}
  PhaseState(std::vector<Vec3> x, std::vector<Vec3> v) : positions(std::move(x)), velocities(std::move(v)) {
    if (positions.size() != velocities.size())
      throw DimensionMismatch("PhaseState: positions and velocities differ in length");
  }

  std::size_t size() const { return positions.size(); }

  bool all_finite() const {
    for (std::size_t i = 0; i < size(); ++i)
      if (!vpfp::all_finite(positions[i]) || !vpfp::all_finite(velocities[i])) return false;
    return true;
  }

  friend bool operator==(const PhaseState&, const PhaseState&) = default;
};

}  // namespace vpfp
