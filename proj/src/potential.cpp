#include "phaseopt/potential.hpp"

#include "phaseopt/errors.hpp"

#include <cmath>
#include <string>

namespace phaseopt {

double potential_eval(const Potential& pot, double r, int order) {
  if (!(r > 0.0 && r < 1.0)) {
    throw DomainViolation("potential evaluated at r = " + format_number(r) + ", outside (0,1)");
  }
  const double s = 1.0 - r;
  switch (order) {
    case 0:
      return pot.c_log * (r * std::log(r) + s * std::log(s)) + pot.c_quad * r * s;
    case 1:
      return pot.c_log * (std::log(r) - std::log(s)) + pot.c_quad * (1.0 - 2.0 * r);
    case 2:
      return pot.c_log / (r * s) - 2.0 * pot.c_quad;
    case 3:
      return pot.c_log * (2.0 * r - 1.0) / (r * r * s * s);
    default:
      throw InvalidArgument("potential derivative order must be 0..3, got " + std::to_string(order));
  }
}

}  // namespace phaseopt
