#pragma once

#include <amt/amr/config.hpp>
#include <amt/amr/geometry.hpp>
#include <amt/amr/gravity.hpp>
#include <amt/amr/octree.hpp>
#include <amt/amr/simulation.hpp>
#include <amt/amr/subgrid.hpp>
