#pragma once

// Umbrella header.

#include "mstates/cluster.hpp"
#include "mstates/corrmat.hpp"
#include "mstates/embed.hpp"
#include "mstates/error.hpp"
#include "mstates/panel.hpp"
#include "mstates/pipeline.hpp"
#include "mstates/similarity.hpp"
#include "mstates/spectra.hpp"
#include "mstates/states.hpp"
#include "mstates/synth.hpp"
