#pragma once

#include "ccm/config_json.hpp"
#include "ccm/core.hpp"
#include "ccm/errors.hpp"
#include "ccm/experiments.hpp"
#include "ccm/filter_design.hpp"
#include "ccm/interference.hpp"
#include "ccm/metrics.hpp"
#include "ccm/normalize.hpp"
#include "ccm/overdrive_design.hpp"
#include "ccm/plant_models.hpp"
#include "ccm/simulator.hpp"
#include "ccm/slope_design.hpp"
#include "ccm/spectrum.hpp"
#include "ccm/tradeoff.hpp"
#include "ccm/units.hpp"
