#pragma once

// Umbrella header for the motenc library: temporal encoders for skeletal
// motion prediction, classification and feature analysis.

#include "motenc/data.hpp"
#include "motenc/error.hpp"
#include "motenc/eval.hpp"
#include "motenc/hierarchy.hpp"
#include "motenc/model.hpp"
#include "motenc/nn.hpp"
#include "motenc/tensor.hpp"
#include "motenc/train.hpp"
