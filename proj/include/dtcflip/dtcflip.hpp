#pragma once

#include "dtcflip/analysis.hpp"
#include "dtcflip/drive.hpp"
#include "dtcflip/integrator.hpp"
#include "dtcflip/odm.hpp"
#include "dtcflip/po.hpp"
#include "dtcflip/rng.hpp"
#include "dtcflip/sweep.hpp"
#include "dtcflip/trajectory.hpp"
