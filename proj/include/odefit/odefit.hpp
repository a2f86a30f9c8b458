#pragma once

// Umbrella header.

#include "odefit/bench.hpp"
#include "odefit/concurrency.hpp"
#include "odefit/config.hpp"
#include "odefit/csv.hpp"
#include "odefit/deck.hpp"
#include "odefit/dual.hpp"
#include "odefit/expr.hpp"
#include "odefit/fit.hpp"
#include "odefit/lbfgs.hpp"
#include "odefit/lint.hpp"
#include "odefit/loss.hpp"
#include "odefit/model.hpp"
#include "odefit/pipeline.hpp"
#include "odefit/pso.hpp"
#include "odefit/scaling.hpp"
#include "odefit/sens.hpp"
#include "odefit/solve.hpp"
