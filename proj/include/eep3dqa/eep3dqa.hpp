// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "eep3dqa/bench.hpp"
#include "eep3dqa/error.hpp"
#include "eep3dqa/evaluation.hpp"
#include "eep3dqa/features.hpp"
#include "eep3dqa/geometry.hpp"
#include "eep3dqa/image_io.hpp"
#include "eep3dqa/model_io.hpp"
#include "eep3dqa/pipeline.hpp"
#include "eep3dqa/projection.hpp"
#include "eep3dqa/raster.hpp"
#include "eep3dqa/rng.hpp"
#include "eep3dqa/sampling.hpp"
#include "eep3dqa/scoring.hpp"
#include "eep3dqa/synthetic.hpp"
