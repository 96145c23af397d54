#pragma once

#include <cmath>
#include <optional>

namespace avica {

struct LineSearchResult {
  bool accepted = false;
  double step = 0.0;
  double loss = 0.0;
};

// Backtracking halving search: tries rho = 1, 1/2, 1/4, ... (at most
// max_halvings halvings) and accepts the first candidate whose loss is finite
// and strictly below current_loss. try_step returns the candidate loss, or
// nullopt when the candidate is invalid (singular unmixing, non-positive noise
// level); invalid and non-finite candidates count as non-decreasing.
template <class TryStep>
LineSearchResult backtracking_line_search(double current_loss, TryStep&& try_step,
                                          int max_halvings) {
  double rho = 1.0;
  for (int h = 0; h <= max_halvings; ++h, rho *= 0.5) {
    const std::optional<double> candidate = try_step(rho);
    if (candidate && std::isfinite(*candidate) && *candidate < current_loss)
      return {true, rho, *candidate};
  }
  return {false, 0.0, current_loss};
}

}  // namespace avica
