#pragma once

#include "baselines.hpp"
#include "checkpoint.hpp"
#include "config.hpp"
#include "dataset.hpp"
#include "drain.hpp"
#include "error.hpp"
#include "featurizer.hpp"
#include "losses.hpp"
#include "matrix.hpp"
#include "meta_trainer.hpp"
#include "metrics.hpp"
#include "mlp.hpp"
#include "optim.hpp"
#include "projection.hpp"
#include "rng.hpp"
#include "sampler.hpp"
#include "synthetic.hpp"

namespace loganmeta {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace loganmeta
