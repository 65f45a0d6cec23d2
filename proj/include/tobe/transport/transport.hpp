#pragma once

#include "tobe/transport/codec.hpp"
#include "tobe/transport/discovery.hpp"
#include "tobe/transport/inlet.hpp"
#include "tobe/transport/outlet.hpp"
#include "tobe/transport/types.hpp"
