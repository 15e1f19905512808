#pragma once

#include "qat/core_model.hpp"
#include "qat/special_functions.hpp"
#include "qat/gaussian_engine.hpp"
#include "qat/grid_engine.hpp"
#include "qat/lindblad_dynamics.hpp"
#include "qat/arrival.hpp"
#include "qat/histories.hpp"
#include "qat/config.hpp"
#include "qat/scenario.hpp"
