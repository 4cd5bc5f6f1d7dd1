#pragma once

#include "adeu/rng.hpp"
#include "adeu/env.hpp"
#include "adeu/grid_oracle.hpp"
#include "adeu/neural.hpp"
#include "adeu/uncertainty.hpp"
#include "adeu/policy.hpp"
#include "adeu/agents.hpp"
#include "adeu/harness/config.hpp"
#include "adeu/harness/runner.hpp"
#include "adeu/harness/report.hpp"
