#pragma once

#include "glformer/tgraph/csv.hpp"
#include "glformer/tgraph/event.hpp"
#include "glformer/tgraph/sampling.hpp"
#include "glformer/tgraph/split.hpp"
#include "glformer/tgraph/store.hpp"
#include "glformer/tgraph/synthetic.hpp"
