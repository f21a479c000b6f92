#pragma once

#include "gplc/allocation.hpp"
#include "gplc/bessel.hpp"
#include "gplc/csv.hpp"
#include "gplc/errors.hpp"
#include "gplc/experiments.hpp"
#include "gplc/gp.hpp"
#include "gplc/kernels.hpp"
#include "gplc/learning_curve.hpp"
#include "gplc/optimize.hpp"
#include "gplc/parallel.hpp"
#include "gplc/planner.hpp"
#include "gplc/quadrature.hpp"
#include "gplc/random.hpp"
#include "gplc/simulator.hpp"
#include "gplc/spectrum.hpp"

namespace gplc {

inline constexpr const char* version = "0.1.0";

} // namespace gplc
