#pragma once

#include "volterra_lift/errors.hpp"
#include "volterra_lift/grid.hpp"
#include "volterra_lift/kernel.hpp"
#include "volterra_lift/resolvent.hpp"
#include "volterra_lift/rng.hpp"
#include "volterra_lift/driver.hpp"
#include "volterra_lift/cone.hpp"
#include "volterra_lift/simulate.hpp"
#include "volterra_lift/riccati.hpp"
#include "volterra_lift/config.hpp"
#include "volterra_lift/commands.hpp"
