#pragma once

#include "lindblad/core.hpp"
#include "lindblad/extrapolation.hpp"
#include "lindblad/grids.hpp"
#include "lindblad/integrators.hpp"
#include "lindblad/model.hpp"
#include "lindblad/models_zoo.hpp"
#include "lindblad/reference.hpp"
#include "lindblad/sampling.hpp"
#include "lindblad/theory.hpp"
