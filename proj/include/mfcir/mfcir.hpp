#pragma once
// Umbrella header.

#include "core.hpp"
#include "random.hpp"
#include "parallel.hpp"
#include "stats.hpp"
#include "gaussian_noise.hpp"
#include "mixed_path.hpp"
#include "cir_scheme.hpp"
#include "roughpath_checks.hpp"
#include "experiments.hpp"
