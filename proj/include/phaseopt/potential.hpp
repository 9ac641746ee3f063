#pragma once

namespace phaseopt {

/**
 * Double-well potential f = f1 + f2 on (0,1):
 *   f1(r) = c_log * (r log r + (1-r) log(1-r))   (convex, singular at 0 and 1)
 *   f2(r) = c_quad * r (1-r)                     (smooth, concave)
 * With c_quad > 2 c_log the well is double (f''(1/2) < 0).
 */
struct Potential {
  double c_log = 0.5;
  double c_quad = 2.0;
};

/// f, f', f'' or f''' at r. Throws DomainViolation unless 0 < r < 1.
double potential_eval(const Potential& pot, double r, int order);

}  // namespace phaseopt
