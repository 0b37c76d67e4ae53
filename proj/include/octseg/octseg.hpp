#pragma once

#include "octseg/detectors.hpp"
#include "octseg/error.hpp"
#include "octseg/filters.hpp"
#include "octseg/grid.hpp"
#include "octseg/io.hpp"
#include "octseg/keyvalue.hpp"
#include "octseg/morphology.hpp"
#include "octseg/parallel.hpp"
#include "octseg/phantom.hpp"
#include "octseg/pipeline.hpp"
#include "octseg/tracer.hpp"
#include "octseg/volume.hpp"
