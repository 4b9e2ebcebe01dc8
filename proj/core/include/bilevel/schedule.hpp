#pragma once

#include <string>

namespace bilevel {

enum class ScheduleKind { kConstant, kDiminishing, kHorizonScaled };

/// Step-size schedule. Evaluation is at the 0-based iteration counter: the
/// solver's loop step t (1-based) evaluates `at(t - 1)`, so a diminishing
/// schedule a/(iter + c) uses a/c on the first step.
struct Schedule {
  ScheduleKind kind = ScheduleKind::kConstant;
  double value = 0.0;  // constant eta
  double a = 0.0;      // diminishing numerator
  double c = 0.0;      // diminishing offset
  double b = 0.0;      // horizon-scaled coefficient
  int horizon = 0;     // horizon-scaled T

  static Schedule constant(double eta);
  static Schedule diminishing(double a, double c);
  static Schedule horizon_scaled(double b, int t_horizon);

  /// Value at 0-based iteration `iter` (>= 0). Strictly positive and finite;
  /// anything else is a configuration error and throws.
  double at(int iter) const;

  /// Round-trippable text form: "constant:v", "diminishing:a:c", "horizon:b:T".
  std::string str() const;

  bool operator==(const Schedule&) const = default;
};

/// Parses the text form. A bare "horizon:b" (no T) binds `default_horizon`;
/// throws std::invalid_argument on malformed input or nonpositive parameters.
Schedule parse_schedule(const std::string& text, int default_horizon = 0);

}  // namespace bilevel
