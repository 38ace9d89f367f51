#pragma once

// Umbrella header.

#include "swapmix/error.hpp"
#include "swapmix/random.hpp"
#include "swapmix/domain.hpp"
#include "swapmix/embedding.hpp"
#include "swapmix/io.hpp"
#include "swapmix/smfx.hpp"
#include "swapmix/context.hpp"
#include "swapmix/bundle.hpp"
#include "swapmix/ingestion.hpp"
#include "swapmix/swapplan.hpp"
#include "swapmix/encoder.hpp"
#include "swapmix/perturb.hpp"
#include "swapmix/models.hpp"
#include "swapmix/metrics.hpp"
#include "swapmix/augment.hpp"
#include "swapmix/bridge.hpp"
#include "swapmix/pipeline.hpp"
#include "swapmix/fixtures.hpp"
