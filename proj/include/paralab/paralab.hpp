#pragma once

#include "paralab/core.hpp"
#include "paralab/space.hpp"
#include "paralab/operators.hpp"
#include "paralab/spectral_functions.hpp"
#include "paralab/calculus.hpp"
#include "paralab/quadrature.hpp"
#include "paralab/paraproducts.hpp"
#include "paralab/assumptions.hpp"
#include "paralab/norm_estimation.hpp"
#include "paralab/estimates.hpp"
#include "paralab/sampling.hpp"
#include "paralab/config.hpp"
#include "paralab/experiments.hpp"
