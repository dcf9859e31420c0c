#pragma once

#include "addis/errors.hpp"
#include "addis/normal.hpp"
#include "addis/core.hpp"
#include "addis/gamma.hpp"
#include "addis/weights.hpp"
#include "addis/engine.hpp"
#include "addis/engines_fwer.hpp"
#include "addis/alpha_c.hpp"
#include "addis/engines_ext.hpp"
#include "addis/oracles.hpp"
#include "addis/procedures.hpp"
#include "addis/sim.hpp"
#include "addis/replay.hpp"
#include "addis/stream.hpp"
#include "addis/verify.hpp"
