#pragma once

// Goodness-of-fit for multivariate parametric models via projected
// empirical processes and the K-2 rotation: many candidate models tested
// against one simulated reference null distribution.

#include "k2gof/errors.hpp"
#include "k2gof/expr.hpp"
#include "k2gof/fit.hpp"
#include "k2gof/grid.hpp"
#include "k2gof/io.hpp"
#include "k2gof/model.hpp"
#include "k2gof/process.hpp"
#include "k2gof/rng.hpp"
#include "k2gof/rotation.hpp"
#include "k2gof/sim.hpp"
#include "k2gof/stats.hpp"
