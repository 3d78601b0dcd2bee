#pragma once

// Umbrella header: the whole simulation framework in one include.

#include "fedcontrol/aggregation.hpp"
#include "fedcontrol/config.hpp"
#include "fedcontrol/data.hpp"
#include "fedcontrol/dataset.hpp"
#include "fedcontrol/errors.hpp"
#include "fedcontrol/experiment.hpp"
#include "fedcontrol/federation.hpp"
#include "fedcontrol/idx.hpp"
#include "fedcontrol/loss_ledger.hpp"
#include "fedcontrol/metrics.hpp"
#include "fedcontrol/model.hpp"
#include "fedcontrol/param_vector.hpp"
#include "fedcontrol/rng.hpp"
#include "fedcontrol/trainer.hpp"
