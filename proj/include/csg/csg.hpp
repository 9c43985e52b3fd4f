#pragma once

// Umbrella header for the slice-generator toolkit.

#include "csg/arch.hpp"
#include "csg/budget.hpp"
#include "csg/code_size.hpp"
#include "csg/dct.hpp"
#include "csg/errors.hpp"
#include "csg/generator.hpp"
#include "csg/nn.hpp"
#include "csg/rng.hpp"
#include "csg/slicer.hpp"
#include "csg/tables.hpp"
#include "csg/tensor.hpp"
#include "csg/tensor_io.hpp"
#include "csg/train.hpp"
