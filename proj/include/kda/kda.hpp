#pragma once

// Umbrella header for the kernel discriminant analysis toolkit.

#include "kda/classify.hpp"
#include "kda/core.hpp"
#include "kda/dataset.hpp"
#include "kda/kernel.hpp"
#include "kda/model.hpp"
#include "kda/pencils.hpp"
#include "kda/random.hpp"
#include "kda/scatter.hpp"
#include "kda/solvers.hpp"
#include "kda/synth.hpp"
