#pragma once

#include "tifinagh/dataset.hpp"
#include "tifinagh/errors.hpp"
#include "tifinagh/image.hpp"
#include "tifinagh/labels.hpp"
#include "tifinagh/model.hpp"
#include "tifinagh/ops.hpp"
#include "tifinagh/preprocess.hpp"
#include "tifinagh/run_config.hpp"
#include "tifinagh/synth.hpp"
#include "tifinagh/tensor.hpp"
#include "tifinagh/training.hpp"
