#pragma once

#include "glformer/model/checkpoint.hpp"
#include "glformer/model/config.hpp"
#include "glformer/model/network.hpp"
#include "glformer/model/params.hpp"
