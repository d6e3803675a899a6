#pragma once

#include "pcstable/bench.hpp"
#include "pcstable/comb.hpp"
#include "pcstable/core.hpp"
#include "pcstable/datagen.hpp"
#include "pcstable/io.hpp"
#include "pcstable/orient.hpp"
#include "pcstable/rng.hpp"
#include "pcstable/skeleton.hpp"
#include "pcstable/stats.hpp"
