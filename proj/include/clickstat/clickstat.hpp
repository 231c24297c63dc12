// Umbrella header.
#pragma once

#include "clickstat/click_model.hpp"
#include "clickstat/crosstalk.hpp"
#include "clickstat/estimators.hpp"
#include "clickstat/io.hpp"
#include "clickstat/mc_sim.hpp"
#include "clickstat/pulsefit.hpp"
#include "clickstat/rng.hpp"
#include "clickstat/types.hpp"
