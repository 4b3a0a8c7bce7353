#pragma once

#include "sfsurrogate/conv.hpp"
#include "sfsurrogate/data/dataset.hpp"
#include "sfsurrogate/data/dataset_io.hpp"
#include "sfsurrogate/demo/location.hpp"
#include "sfsurrogate/error.hpp"
#include "sfsurrogate/gradcheck.hpp"
#include "sfsurrogate/harness/checkpoint.hpp"
#include "sfsurrogate/harness/config.hpp"
#include "sfsurrogate/harness/experiment.hpp"
#include "sfsurrogate/harness/manifest.hpp"
#include "sfsurrogate/io/csv.hpp"
#include "sfsurrogate/io/digest.hpp"
#include "sfsurrogate/io/pgm.hpp"
#include "sfsurrogate/nn/blocks.hpp"
#include "sfsurrogate/nn/mlp.hpp"
#include "sfsurrogate/nn/unet.hpp"
#include "sfsurrogate/ops.hpp"
#include "sfsurrogate/optim/adam.hpp"
#include "sfsurrogate/optim/metrics.hpp"
#include "sfsurrogate/optim/train.hpp"
#include "sfsurrogate/tensor.hpp"
