#pragma once

#include "lassodist/errors.hpp"
#include "lassodist/model.hpp"
#include "lassodist/lp.hpp"
#include "lassodist/solver.hpp"
#include "lassodist/geometry.hpp"
#include "lassodist/normal.hpp"
#include "lassodist/rng.hpp"
#include "lassodist/quadrature.hpp"
#include "lassodist/probability.hpp"
#include "lassodist/mvn.hpp"
#include "lassodist/monte_carlo.hpp"
#include "lassodist/distribution.hpp"
#include "lassodist/simulate.hpp"
#include "lassodist/io.hpp"
