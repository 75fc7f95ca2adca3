// SPDX-License-Identifier: MIT
#pragma once

#include "vexsde/errors.hpp"
#include "vexsde/rng.hpp"
#include "vexsde/parallel.hpp"
#include "vexsde/exponents.hpp"
#include "vexsde/model.hpp"
#include "vexsde/simulate.hpp"
#include "vexsde/picard.hpp"
#include "vexsde/analysis.hpp"
#include "vexsde/tridiagonal.hpp"
#include "vexsde/fk_poisson.hpp"
