#pragma once

#include "skewsplat/camera.hpp"
#include "skewsplat/fit1d.hpp"
#include "skewsplat/gradients.hpp"
#include "skewsplat/image.hpp"
#include "skewsplat/io.hpp"
#include "skewsplat/log.hpp"
#include "skewsplat/metrics.hpp"
#include "skewsplat/optimizer.hpp"
#include "skewsplat/parallel.hpp"
#include "skewsplat/rasterizer.hpp"
#include "skewsplat/scene_fit.hpp"
#include "skewsplat/snkernel.hpp"
#include "skewsplat/types.hpp"
#include "skewsplat/verify.hpp"
