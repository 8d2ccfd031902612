#pragma once

#include "roadwarp/error.hpp"
#include "roadwarp/geometry.hpp"
#include "roadwarp/metrics.hpp"
#include "roadwarp/parallel.hpp"
#include "roadwarp/physics.hpp"
#include "roadwarp/predictors.hpp"
#include "roadwarp/process.hpp"
#include "roadwarp/render.hpp"
#include "roadwarp/retrieval.hpp"
#include "roadwarp/scenario_io.hpp"
#include "roadwarp/scene.hpp"
#include "roadwarp/search.hpp"
#include "roadwarp/synthetic.hpp"
#include "roadwarp/transforms.hpp"
