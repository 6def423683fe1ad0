#pragma once

// Umbrella header: the whole library in one include.

#include "cluster.hpp"
#include "config.hpp"
#include "depth.hpp"
#include "distort.hpp"
#include "errors.hpp"
#include "io.hpp"
#include "matrix.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "partition.hpp"
#include "pipeline.hpp"
#include "random.hpp"
#include "reduce.hpp"
#include "select.hpp"
#include "series.hpp"
