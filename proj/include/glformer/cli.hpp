#pragma once

#include "glformer/cli/app.hpp"
#include "glformer/cli/commands.hpp"
#include "glformer/cli/runspec.hpp"
