#pragma once

#include "fiberbell/counting.hpp"
#include "fiberbell/errors.hpp"
#include "fiberbell/estimation.hpp"
#include "fiberbell/monte_carlo.hpp"
#include "fiberbell/philox.hpp"
#include "fiberbell/polarization.hpp"
