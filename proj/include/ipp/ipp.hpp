#pragma once

#include "ipp/bench.hpp"
#include "ipp/binary_io.hpp"
#include "ipp/cmaes.hpp"
#include "ipp/config.hpp"
#include "ipp/env_gen.hpp"
#include "ipp/episode.hpp"
#include "ipp/episode_log.hpp"
#include "ipp/grid.hpp"
#include "ipp/grid_io.hpp"
#include "ipp/learn.hpp"
#include "ipp/planners.hpp"
#include "ipp/primitive_io.hpp"
#include "ipp/primitives.hpp"
#include "ipp/render.hpp"
#include "ipp/rng.hpp"
#include "ipp/runner.hpp"
#include "ipp/scenario_io.hpp"
#include "ipp/sensor.hpp"
#include "ipp/stats.hpp"
#include "ipp/train.hpp"
