#pragma once

// Umbrella header: work statistics for the driven two-site Hubbard dimer.

#include "dimerwork/config.hpp"
#include "dimerwork/dynamics.hpp"
#include "dimerwork/functionals.hpp"
#include "dimerwork/model.hpp"
#include "dimerwork/numerics.hpp"
#include "dimerwork/protocol.hpp"
#include "dimerwork/sweep.hpp"
#include "dimerwork/thermo.hpp"
