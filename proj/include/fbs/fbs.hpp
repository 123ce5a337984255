#pragma once

#include "fbs/analysis.hpp"
#include "fbs/config.hpp"
#include "fbs/dynamics.hpp"
#include "fbs/error.hpp"
#include "fbs/fockspace.hpp"
#include "fbs/hamiltonians.hpp"
#include "fbs/metrics.hpp"
#include "fbs/protocols.hpp"
#include "fbs/state_io.hpp"
#include "fbs/version.hpp"
