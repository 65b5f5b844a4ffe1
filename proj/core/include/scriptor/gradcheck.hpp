#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace scriptor {

struct GradCheckCase {
  std::string name;
  double max_rel = 0.0;
  std::int64_t checked = 0;
  bool pass = false;
};

struct GradCheckReport {
  std::vector<GradCheckCase> cases;
  double eps = 1e-5;
  double tolerance = 1e-4;
  double max_rel = 0.0;
  bool all_pass = false;

  std::string summary() const;  // one line per case plus a verdict
};

// Central-difference check of every differentiable operation against the
// tape's analytic gradients. Coordinates are subsampled per parameter past the
// cap; the builders are deterministic, so a given cap always checks the same
// coordinates.
GradCheckReport run_gradient_suite(std::int64_t max_coords_per_param = 24);

}  // namespace scriptor
