#pragma once

#include "gamehedge/commands.hpp"
#include "gamehedge/config.hpp"
#include "gamehedge/dynkin.hpp"
#include "gamehedge/errors.hpp"
#include "gamehedge/hedging.hpp"
#include "gamehedge/market.hpp"
#include "gamehedge/numerics.hpp"
#include "gamehedge/payoff.hpp"
#include "gamehedge/robust_step.hpp"
#include "gamehedge/serialize.hpp"
#include "gamehedge/version.hpp"
