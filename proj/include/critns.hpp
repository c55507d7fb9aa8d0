#pragma once

#include "critns/error.hpp"
#include "critns/diagnostics.hpp"
#include "critns/grid.hpp"
#include "critns/fft.hpp"
#include "critns/spectral_field.hpp"
#include "critns/quadrature.hpp"
#include "critns/trajectory.hpp"
#include "critns/operators.hpp"
#include "critns/contraction.hpp"
#include "critns/mild_solver.hpp"
#include "critns/criticality.hpp"
#include "critns/analytic_datum.hpp"
#include "critns/symmetry_profiles.hpp"
#include "critns/snapshot_io.hpp"
#include "critns/harness.hpp"
