#pragma once

// Umbrella header.

#include "streamkv/bench.hpp"
#include "streamkv/cache.hpp"
#include "streamkv/cli.hpp"
#include "streamkv/datapipe.hpp"
#include "streamkv/engine.hpp"
#include "streamkv/errors.hpp"
#include "streamkv/io.hpp"
#include "streamkv/math.hpp"
#include "streamkv/model.hpp"
#include "streamkv/prng.hpp"
#include "streamkv/rope.hpp"
#include "streamkv/training.hpp"
#include "streamkv/verify.hpp"
