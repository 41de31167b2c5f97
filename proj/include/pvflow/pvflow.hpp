#pragma once

// Pathwise differential equations dY = f(Y) dX driven by paths of finite
// p-variation (p < 2): Young integration, Picard solvers, diffeomorphic-flow
// verification, geometric (fictitious-time) jump handling, and stochastic
// driver generators.

#include "pvflow/cadlag.hpp"
#include "pvflow/drivers.hpp"
#include "pvflow/experiment.hpp"
#include "pvflow/field.hpp"
#include "pvflow/flow.hpp"
#include "pvflow/io.hpp"
#include "pvflow/path.hpp"
#include "pvflow/pvariation.hpp"
#include "pvflow/quadrature.hpp"
#include "pvflow/rng.hpp"
#include "pvflow/solver.hpp"
#include "pvflow/young.hpp"
