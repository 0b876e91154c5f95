#pragma once

#include "glformer/traineval/config.hpp"
#include "glformer/traineval/evaluate.hpp"
#include "glformer/traineval/metrics.hpp"
#include "glformer/traineval/train.hpp"
