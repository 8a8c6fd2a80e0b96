#pragma once

#include "abrsim/control.hpp"
#include "abrsim/error.hpp"
#include "abrsim/estimator.hpp"
#include "abrsim/format.hpp"
#include "abrsim/media.hpp"
#include "abrsim/metrics.hpp"
#include "abrsim/oracle.hpp"
#include "abrsim/schemes/baselines.hpp"
#include "abrsim/schemes/cava.hpp"
#include "abrsim/schemes/filters.hpp"
#include "abrsim/schemes/pia.hpp"
#include "abrsim/schemes/quad.hpp"
#include "abrsim/schemes/registry.hpp"
#include "abrsim/schemes/scheme.hpp"
#include "abrsim/sim.hpp"
#include "abrsim/synth.hpp"
#include "abrsim/tuning.hpp"
