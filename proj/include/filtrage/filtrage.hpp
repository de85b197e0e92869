#pragma once

#include "filtrage/characteristics.hpp"
#include "filtrage/estimation.hpp"
#include "filtrage/models/bivariate_diffusion.hpp"
#include "filtrage/models/coarse_brownian.hpp"
#include "filtrage/models/poisson_pair.hpp"
#include "filtrage/models/random_time.hpp"
#include "filtrage/models/structure_driven.hpp"
#include "filtrage/models/two_defaults.hpp"
#include "filtrage/numerics.hpp"
#include "filtrage/path_bundle.hpp"
#include "filtrage/projection.hpp"
#include "filtrage/random.hpp"
#include "filtrage/shrinkage.hpp"
#include "filtrage/time_grid.hpp"
#include "filtrage/truncation.hpp"
