#pragma once

#include "paforge/csv.hpp"
#include "paforge/design_space.hpp"
#include "paforge/error.hpp"
#include "paforge/features.hpp"
#include "paforge/pipeline.hpp"
#include "paforge/ranking.hpp"
#include "paforge/regressor.hpp"
#include "paforge/rng.hpp"
#include "paforge/sampler.hpp"
#include "paforge/sim_backend.hpp"
#include "paforge/validation.hpp"
