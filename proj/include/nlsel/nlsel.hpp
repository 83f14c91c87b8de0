#pragma once

#include "nlsel/errors.hpp"
#include "nlsel/core.hpp"
#include "nlsel/priors.hpp"
#include "nlsel/marginal.hpp"
#include "nlsel/search.hpp"
#include "nlsel/bench.hpp"
