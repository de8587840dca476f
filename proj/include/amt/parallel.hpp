#pragma once

#include <amt/parallel/algorithm.hpp>
#include <amt/parallel/policy.hpp>
#include <amt/parallel/sender.hpp>
