#pragma once

#include <adawave/attention.hpp>
#include <adawave/baselines.hpp>
#include <adawave/bench.hpp>
#include <adawave/checkpoint.hpp>
#include <adawave/config.hpp>
#include <adawave/data.hpp>
#include <adawave/decomposition.hpp>
#include <adawave/error.hpp>
#include <adawave/experiment.hpp>
#include <adawave/grouped_linear.hpp>
#include <adawave/lifting.hpp>
#include <adawave/metrics.hpp>
#include <adawave/model.hpp>
#include <adawave/ops.hpp>
#include <adawave/optim.hpp>
#include <adawave/parameters.hpp>
#include <adawave/plot.hpp>
#include <adawave/random.hpp>
#include <adawave/resample.hpp>
#include <adawave/synth.hpp>
#include <adawave/task.hpp>
#include <adawave/tensor.hpp>
#include <adawave/train.hpp>
