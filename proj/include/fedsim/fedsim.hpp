#pragma once

// Umbrella header for the federated-learning security simulator.

#include "fedsim/adam.hpp"
#include "fedsim/checkpoint.hpp"
#include "fedsim/config.hpp"
#include "fedsim/dataset.hpp"
#include "fedsim/defense.hpp"
#include "fedsim/drqn.hpp"
#include "fedsim/error.hpp"
#include "fedsim/federation.hpp"
#include "fedsim/harness.hpp"
#include "fedsim/idx.hpp"
#include "fedsim/matrix.hpp"
#include "fedsim/mlp.hpp"
#include "fedsim/parallel.hpp"
#include "fedsim/param_vector.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/round.hpp"
#include "fedsim/selection.hpp"
#include "fedsim/threat.hpp"
#include "fedsim/version.hpp"
