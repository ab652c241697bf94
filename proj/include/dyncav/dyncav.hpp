#pragma once

#include "analysis.hpp"
#include "cavity.hpp"
#include "coupling.hpp"
#include "evolve.hpp"
#include "io.hpp"
#include "observables.hpp"
#include "oracles.hpp"
#include "run.hpp"
