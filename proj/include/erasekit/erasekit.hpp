#pragma once

#include "alignment.hpp"
#include "checkpoint.hpp"
#include "coding_rate.hpp"
#include "datagen.hpp"
#include "erasure_net.hpp"
#include "eval_metrics.hpp"
#include "experiments.hpp"
#include "kd_tree.hpp"
#include "kernel_lab.hpp"
#include "mlp.hpp"
#include "pipeline.hpp"
#include "rng.hpp"
#include "types.hpp"
