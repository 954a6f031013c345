#pragma once

#include "errors.hpp"
#include "glasso.hpp"
#include "graph.hpp"
#include "io.hpp"
#include "linalg.hpp"
#include "prox.hpp"
#include "sim.hpp"
#include "solver.hpp"
#include "tuning.hpp"
