#pragma once

#include "ladmm/certify.hpp"
#include "ladmm/core_model.hpp"
#include "ladmm/error.hpp"
#include "ladmm/experiment.hpp"
#include "ladmm/linalg.hpp"
#include "ladmm/prox_lib.hpp"
#include "ladmm/random.hpp"
#include "ladmm/solver.hpp"
