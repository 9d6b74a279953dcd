#pragma once

#include "costs.hpp"
#include "errors.hpp"
#include "json_io.hpp"
#include "learning.hpp"
#include "ledger.hpp"
#include "metrics.hpp"
#include "retrieval.hpp"
#include "rng.hpp"
#include "simulator.hpp"
#include "skill_io.hpp"
#include "skills.hpp"
#include "stats.hpp"
#include "text.hpp"
