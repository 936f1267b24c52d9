#pragma once

// Umbrella header: the full forecasting toolkit.

#include "levycast/autodiff.hpp"
#include "levycast/config.hpp"
#include "levycast/data.hpp"
#include "levycast/grid.hpp"
#include "levycast/io.hpp"
#include "levycast/loss.hpp"
#include "levycast/metrics.hpp"
#include "levycast/mixture.hpp"
#include "levycast/model.hpp"
#include "levycast/network.hpp"
#include "levycast/optimizer.hpp"
#include "levycast/rng.hpp"
#include "levycast/sampler.hpp"
#include "levycast/stable.hpp"
