#pragma once

#include "compass/artifacts.hpp"
#include "compass/clustering.hpp"
#include "compass/config.hpp"
#include "compass/core.hpp"
#include "compass/dataio.hpp"
#include "compass/error.hpp"
#include "compass/mismatch.hpp"
#include "compass/monitor.hpp"
#include "compass/random.hpp"
#include "compass/sampler.hpp"
#include "compass/simgen.hpp"
