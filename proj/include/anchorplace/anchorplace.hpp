#pragma once

#include "anchorplace/errors.hpp"
#include "anchorplace/scenario.hpp"
#include "anchorplace/ranging_model.hpp"
#include "anchorplace/cone_program.hpp"
#include "anchorplace/cone_solver.hpp"
#include "anchorplace/placement.hpp"
#include "anchorplace/placement_owa.hpp"
#include "anchorplace/placement_ows.hpp"
#include "anchorplace/oracle.hpp"
#include "anchorplace/verify_mc.hpp"
