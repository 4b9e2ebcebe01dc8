#include "bilevel/schedule.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace bilevel {

namespace {
void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw std::invalid_argument(std::string("schedule: ") + what + " must be positive and finite");
}
}  // namespace

Schedule Schedule::constant(double eta) {
  require_positive(eta, "constant value");
  Schedule s;
  s.kind = ScheduleKind::kConstant;
  s.value = eta;
  return s;
}

Schedule Schedule::diminishing(double a, double c) {
  require_positive(a, "diminishing numerator a");
  require_positive(c, "diminishing offset c");
  Schedule s;
  s.kind = ScheduleKind::kDiminishing;
  s.a = a;
  s.c = c;
  return s;
}

Schedule Schedule::horizon_scaled(double b, int t_horizon) {
  require_positive(b, "horizon coefficient b");
  if (t_horizon < 1) throw std::invalid_argument("schedule: horizon T must be >= 1");
  Schedule s;
  s.kind = ScheduleKind::kHorizonScaled;
  s.b = b;
  s.horizon = t_horizon;
  return s;
}

double Schedule::at(int iter) const {
  if (iter < 0) throw std::invalid_argument("schedule: iteration must be >= 0");
  double v = 0.0;
  switch (kind) {
    case ScheduleKind::kConstant:
      v = value;
      break;
    case ScheduleKind::kDiminishing:
      v = a / (static_cast<double>(iter) + c);
      break;
    case ScheduleKind::kHorizonScaled:
      v = b / std::sqrt(static_cast<double>(horizon));
      break;
  }
  if (!(v > 0.0) || !std::isfinite(v))
    throw std::runtime_error("schedule: evaluation produced a nonpositive or non-finite step size");
  return v;
}

std::string Schedule::str() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind) {
    case ScheduleKind::kConstant:
      os << "constant:" << value;
      break;
    case ScheduleKind::kDiminishing:
      os << "diminishing:" << a << ":" << c;
      break;
    case ScheduleKind::kHorizonScaled:
      os << "horizon:" << b << ":" << horizon;
      break;
  }
  return os.str();
}

Schedule parse_schedule(const std::string& text, int default_horizon) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : text) {
    if (ch == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  parts.push_back(cur);

  auto to_d = [&](const std::string& s) {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("schedule: bad number '" + s + "'");
    return v;
  };

  const std::string& kind = parts[0];
  if (kind == "constant" && parts.size() == 2) return Schedule::constant(to_d(parts[1]));
  if (kind == "diminishing" && parts.size() == 3)
    return Schedule::diminishing(to_d(parts[1]), to_d(parts[2]));
  if (kind == "horizon" && parts.size() == 3)
    return Schedule::horizon_scaled(to_d(parts[1]), static_cast<int>(to_d(parts[2])));
  if (kind == "horizon" && parts.size() == 2) {
    if (default_horizon < 1)
      throw std::invalid_argument("schedule: 'horizon:b' needs a horizon to bind to");
    return Schedule::horizon_scaled(to_d(parts[1]), default_horizon);
  }
  throw std::invalid_argument("schedule: cannot parse '" + text +
                              "' (expected constant:v, diminishing:a:c or horizon:b[:T])");
}

}  // namespace bilevel
