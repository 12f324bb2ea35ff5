#pragma once

// Umbrella header for the pdsplit library: delayed primal-dual proximal
// splitting solvers for multi-agent structured convex optimization, a
// deterministic bounded-delay network simulator, stepsize/rate tuning,
// and convergence diagnostics.

#include "pdsplit/block.hpp"
#include "pdsplit/builders.hpp"
#include "pdsplit/delay.hpp"
#include "pdsplit/diagnostics.hpp"
#include "pdsplit/errors.hpp"
#include "pdsplit/functions.hpp"
#include "pdsplit/problem.hpp"
#include "pdsplit/rng.hpp"
#include "pdsplit/solvers.hpp"
#include "pdsplit/tuning.hpp"
