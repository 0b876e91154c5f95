#pragma once

#include "glformer/numcore/adam.hpp"
#include "glformer/numcore/autodiff.hpp"
#include "glformer/numcore/gradcheck.hpp"
#include "glformer/numcore/init.hpp"
#include "glformer/numcore/matrix.hpp"
#include "glformer/numcore/ops.hpp"
#include "glformer/numcore/tape.hpp"
