#pragma once

// Umbrella header for the whole library.

#include "ihdr/autodiff.hpp"
#include "ihdr/errors.hpp"
#include "ihdr/eval.hpp"
#include "ihdr/image.hpp"
#include "ihdr/intrinsic.hpp"
#include "ihdr/io_pfm.hpp"
#include "ihdr/io_png.hpp"
#include "ihdr/io_rgbe.hpp"
#include "ihdr/isp.hpp"
#include "ihdr/losses.hpp"
#include "ihdr/manifest.hpp"
#include "ihdr/nets.hpp"
#include "ihdr/pipeline.hpp"
#include "ihdr/pu21_constants.hpp"
#include "ihdr/report.hpp"
#include "ihdr/rng.hpp"
#include "ihdr/train.hpp"
