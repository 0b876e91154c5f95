#pragma once

#include "glformer/mixers/adaptive.hpp"
#include "glformer/mixers/baselines.hpp"
#include "glformer/mixers/block.hpp"
#include "glformer/mixers/offsets.hpp"
