#pragma once

#include "exptrack/dynamics.hpp"
#include "exptrack/errors.hpp"
#include "exptrack/log.hpp"
#include "exptrack/lyapunov.hpp"
#include "exptrack/simulate.hpp"
#include "exptrack/tracking.hpp"
#include "exptrack/trajgen.hpp"
#include "exptrack/types.hpp"
