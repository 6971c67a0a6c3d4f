#pragma once

// Umbrella header: the whole library in dependency order.

#include "rawlskm/random.hpp"
#include "rawlskm/parallel.hpp"
#include "rawlskm/dataset.hpp"
#include "rawlskm/clustering.hpp"
#include "rawlskm/utility.hpp"
#include "rawlskm/policy.hpp"
#include "rawlskm/operators.hpp"
#include "rawlskm/traverse.hpp"
#include "rawlskm/scan.hpp"
#include "rawlskm/io.hpp"
#include "rawlskm/svg.hpp"
