#pragma once

#include "lvseg/align.hpp"
#include "lvseg/contour.hpp"
#include "lvseg/error.hpp"
#include "lvseg/geometry.hpp"
#include "lvseg/io.hpp"
#include "lvseg/mesh.hpp"
#include "lvseg/metrics.hpp"
#include "lvseg/parallel.hpp"
#include "lvseg/phantom.hpp"
#include "lvseg/pipeline.hpp"
#include "lvseg/profile.hpp"
#include "lvseg/registration.hpp"
