#pragma once

#include "baseline_metrics.hpp"
#include "dcue.hpp"
#include "error.hpp"
#include "meta_eval.hpp"
#include "parallel.hpp"
#include "score_log.hpp"
#include "simulator.hpp"
#include "stats.hpp"
#include "unlearn_losses.hpp"
