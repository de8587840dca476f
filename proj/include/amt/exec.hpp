#pragma once

#include <amt/exec/simd.hpp>
#include <amt/exec/space.hpp>
