#pragma once

#include "compass/clustering/agglomerative.hpp"
#include "compass/clustering/assign.hpp"
#include "compass/clustering/butina.hpp"
#include "compass/clustering/common.hpp"
#include "compass/clustering/density.hpp"
#include "compass/clustering/kmeans.hpp"
#include "compass/clustering/quality.hpp"
