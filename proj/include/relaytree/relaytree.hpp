#pragma once

#include "relaytree/analysis.hpp"
#include "relaytree/bounds.hpp"
#include "relaytree/csv.hpp"
#include "relaytree/error.hpp"
#include "relaytree/fit.hpp"
#include "relaytree/fusion.hpp"
#include "relaytree/geometry.hpp"
#include "relaytree/monte_carlo.hpp"
#include "relaytree/oracle.hpp"
#include "relaytree/schedule.hpp"
#include "relaytree/trajectory.hpp"
