#pragma once

#include "hpg/policy/generalized_gaussian.hpp"
#include "hpg/policy/policy.hpp"
#include "hpg/policy/safe_log_barrier.hpp"
#include "hpg/policy/softmax.hpp"
