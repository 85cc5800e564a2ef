#pragma once

#include "fedishc/cumulants.hpp"
#include "fedishc/datagen.hpp"
#include "fedishc/discovery.hpp"
#include "fedishc/error.hpp"
#include "fedishc/evaluation.hpp"
#include "fedishc/federation.hpp"
#include "fedishc/gaussian.hpp"
#include "fedishc/grid.hpp"
#include "fedishc/io.hpp"
#include "fedishc/pipeline.hpp"
#include "fedishc/transport.hpp"
#include "fedishc/wire.hpp"
