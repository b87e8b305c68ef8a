#pragma once

// Umbrella header.

#include "btseq/autodiff.hpp"
#include "btseq/checkpoint.hpp"
#include "btseq/config.hpp"
#include "btseq/corpus.hpp"
#include "btseq/decode.hpp"
#include "btseq/errors.hpp"
#include "btseq/gradcheck.hpp"
#include "btseq/lstm.hpp"
#include "btseq/metrics.hpp"
#include "btseq/model.hpp"
#include "btseq/model_io.hpp"
#include "btseq/optim.hpp"
#include "btseq/rng.hpp"
#include "btseq/tensor.hpp"
#include "btseq/tokens.hpp"
#include "btseq/trainer.hpp"
