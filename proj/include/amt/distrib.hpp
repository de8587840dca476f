#pragma once

#include <amt/distrib/codec.hpp>
#include <amt/distrib/errors.hpp>
#include <amt/distrib/gid.hpp>
#include <amt/distrib/locality.hpp>
#include <amt/distrib/parcel.hpp>
#include <amt/distrib/transport.hpp>
