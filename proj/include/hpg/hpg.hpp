#pragma once

#include "hpg/diagnostics.hpp"
#include "hpg/env.hpp"
#include "hpg/estimators.hpp"
#include "hpg/optimizers.hpp"
#include "hpg/oracle.hpp"
#include "hpg/policy.hpp"
#include "hpg/problems.hpp"
#include "hpg/random.hpp"
#include "hpg/types.hpp"
