#pragma once

// clasp: compliant-manipulation control library and deterministic contact
// simulator. Umbrella header.

#include "clasp/calibration.hpp"
#include "clasp/compliance.hpp"
#include "clasp/config.hpp"
#include "clasp/error.hpp"
#include "clasp/geometry.hpp"
#include "clasp/log.hpp"
#include "clasp/policy.hpp"
#include "clasp/sim.hpp"
