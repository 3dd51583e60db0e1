#pragma once

#include "fmlc/error.hpp"
#include "fmlc/fusion.hpp"
#include "fmlc/geotiff.hpp"
#include "fmlc/grid.hpp"
#include "fmlc/losses.hpp"
#include "fmlc/metrics.hpp"
#include "fmlc/parallel.hpp"
#include "fmlc/raster.hpp"
#include "fmlc/simplex.hpp"
#include "fmlc/smoothing.hpp"
#include "fmlc/synth.hpp"
#include "fmlc/tensor_io.hpp"
#include "fmlc/tiling.hpp"
