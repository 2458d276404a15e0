#pragma once

#include "floquet/errors.hpp"
#include "floquet/lattice.hpp"
#include "floquet/spectral.hpp"
#include "floquet/gap_function.hpp"
#include "floquet/quadrature.hpp"
#include "floquet/evolution.hpp"
#include "floquet/chern_sum.hpp"
#include "floquet/invariants_bulk.hpp"
#include "floquet/invariants_edge.hpp"
#include "floquet/rng.hpp"
#include "floquet/models.hpp"
#include "floquet/io.hpp"
