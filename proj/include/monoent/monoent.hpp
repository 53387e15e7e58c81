#pragma once

#include "error.hpp"
#include "version.hpp"
#include "seeding.hpp"
#include "grid_fn.hpp"
#include "grid_io.hpp"
#include "rates.hpp"
#include "bracketing.hpp"
#include "packing.hpp"
#include "density_est.hpp"
