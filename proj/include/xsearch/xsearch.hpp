#pragma once

#include "acquisition.hpp"
#include "bench.hpp"
#include "budget.hpp"
#include "crossings.hpp"
#include "extremes.hpp"
#include "gp.hpp"
#include "kernel.hpp"
#include "loop.hpp"
#include "lowdisc.hpp"
#include "math.hpp"
#include "optimize.hpp"
#include "record_io.hpp"
#include "rng.hpp"
