#include "evsim/common/geometry.hpp"

#include <cmath>
#include <string>

#include "evsim/common/error.hpp"

namespace evsim {

void check_unit_quaternion(const Quat& q, const char* what) {
    const double n = q.norm();
    if (!std::isfinite(n) || std::abs(n - 1.0) > 1e-6) {
        throw ValidationError(std::string(what) + " quaternion norm is " + std::to_string(n) + "; expected 1");
    }
}

}  // namespace evsim
