#pragma once

#include "aetsgd/baselines.hpp"
#include "aetsgd/consistency.hpp"
#include "aetsgd/harness.hpp"
#include "aetsgd/idx.hpp"
#include "aetsgd/node.hpp"
#include "aetsgd/objectives.hpp"
#include "aetsgd/report.hpp"
#include "aetsgd/schedules.hpp"
#include "aetsgd/simnet.hpp"
#include "aetsgd/topology.hpp"
#include "aetsgd/trace.hpp"
