#pragma once

#include "qepsd/phase_space.hpp"
#include "qepsd/keystream.hpp"
#include "qepsd/modem.hpp"
#include "qepsd/qeps.hpp"
#include "qepsd/link.hpp"
#include "qepsd/vectors.hpp"
#include "qepsd/scatter.hpp"
#include "qepsd/harness.hpp"
