#pragma once

#include "obprox/errors.hpp"
#include "obprox/rng.hpp"
#include "obprox/dataio.hpp"
#include "obprox/lossmodel.hpp"
#include "obprox/prox.hpp"
#include "obprox/diagnostics.hpp"
#include "obprox/solvers.hpp"
#include "obprox/synthetic.hpp"
#include "obprox/report.hpp"
#include "obprox/experiment.hpp"
