#pragma once

#include "mmsense/constants.hpp"
#include "mmsense/echo.hpp"
#include "mmsense/fusion.hpp"
#include "mmsense/geometry.hpp"
#include "mmsense/periodogram.hpp"
#include "mmsense/random.hpp"
#include "mmsense/runner.hpp"
#include "mmsense/scenario.hpp"
#include "mmsense/scene.hpp"
