#pragma once

#include "pgo/config.hpp"
#include "pgo/corrupt.hpp"
#include "pgo/errors.hpp"
#include "pgo/eval.hpp"
#include "pgo/io.hpp"
#include "pgo/kernel.hpp"
#include "pgo/lie.hpp"
#include "pgo/posegraph.hpp"
#include "pgo/regression.hpp"
#include "pgo/schedule.hpp"
#include "pgo/solver.hpp"
#include "pgo/synthetic.hpp"
