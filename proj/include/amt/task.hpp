#pragma once

#include <amt/task/future.hpp>
#include <amt/task/mutex.hpp>
#include <amt/task/runtime.hpp>
