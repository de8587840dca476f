#pragma once

#include <amt/bench/maclaurin.hpp>
#include <amt/bench/performance.hpp>
#include <amt/bench/suite.hpp>
