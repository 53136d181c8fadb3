#pragma once

#include "extreme_blocks/dist.hpp"
#include "extreme_blocks/error.hpp"
#include "extreme_blocks/fit.hpp"
#include "extreme_blocks/graph.hpp"
#include "extreme_blocks/io.hpp"
#include "extreme_blocks/latent.hpp"
#include "extreme_blocks/linalg.hpp"
#include "extreme_blocks/model.hpp"
#include "extreme_blocks/nnls.hpp"
#include "extreme_blocks/normal.hpp"
#include "extreme_blocks/rng.hpp"
#include "extreme_blocks/sim.hpp"
