#pragma once

#include "driftbench/core.hpp"
#include "driftbench/random.hpp"
#include "driftbench/distribution.hpp"
#include "driftbench/transport.hpp"
#include "driftbench/drift.hpp"
#include "driftbench/losses.hpp"
#include "driftbench/optim.hpp"
#include "driftbench/regret.hpp"
#include "driftbench/diagnostics.hpp"
#include "driftbench/harness/config.hpp"
#include "driftbench/harness/experiments.hpp"
#include "driftbench/harness/export.hpp"
#include "driftbench/harness/bound_validation.hpp"
#include "driftbench/harness/suites.hpp"
