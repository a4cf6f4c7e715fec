#pragma once

#include "throughputlab/bench.hpp"
#include "throughputlab/cost_model.hpp"
#include "throughputlab/csv.hpp"
#include "throughputlab/errors.hpp"
#include "throughputlab/fat_skiplist.hpp"
#include "throughputlab/mcs_lock.hpp"
#include "throughputlab/sim/program.hpp"
#include "throughputlab/sim/programs.hpp"
#include "throughputlab/sim/simulator.hpp"
#include "throughputlab/spin.hpp"
#include "throughputlab/treiber_stack.hpp"
