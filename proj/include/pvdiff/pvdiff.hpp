#pragma once

#include "pvdiff/adam.hpp"
#include "pvdiff/checkpoint.hpp"
#include "pvdiff/commands.hpp"
#include "pvdiff/config.hpp"
#include "pvdiff/data.hpp"
#include "pvdiff/denoiser.hpp"
#include "pvdiff/diffusion.hpp"
#include "pvdiff/error.hpp"
#include "pvdiff/grid.hpp"
#include "pvdiff/metrics.hpp"
#include "pvdiff/nn.hpp"
#include "pvdiff/patching.hpp"
#include "pvdiff/pipeline.hpp"
#include "pvdiff/rng.hpp"
#include "pvdiff/schedule.hpp"
#include "pvdiff/svg.hpp"
#include "pvdiff/tensor.hpp"
#include "pvdiff/timeutil.hpp"
