#pragma once

#include "momentctl/common.hpp"

namespace momentctl {

/// Matrix exponential by scaling and squaring with a diagonal Pade
/// approximant of degree 3, 5, 7, 9 or 13 picked from the 1-norm.
/// Throws Error on non-square or non-finite input.
Matrix expm(const Eigen::Ref<const Matrix>& M);

}  // namespace momentctl
