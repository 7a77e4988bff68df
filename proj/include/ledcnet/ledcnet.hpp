#pragma once

#include "ledcnet/core/autograd.hpp"
#include "ledcnet/core/cost.hpp"
#include "ledcnet/core/errors.hpp"
#include "ledcnet/core/random.hpp"
#include "ledcnet/core/tensor.hpp"
#include "ledcnet/data/loader.hpp"
#include "ledcnet/data/manifest.hpp"
#include "ledcnet/data/palette.hpp"
#include "ledcnet/data/png_io.hpp"
#include "ledcnet/data/synthetic.hpp"
#include "ledcnet/data/tiling.hpp"
#include "ledcnet/losses/focal.hpp"
#include "ledcnet/metrics/confusion.hpp"
#include "ledcnet/model/backbone.hpp"
#include "ledcnet/model/config.hpp"
#include "ledcnet/model/decoder.hpp"
#include "ledcnet/model/ledcnet.hpp"
#include "ledcnet/ops/attention.hpp"
#include "ledcnet/ops/conv2d.hpp"
#include "ledcnet/ops/norm.hpp"
#include "ledcnet/ops/pointwise.hpp"
#include "ledcnet/ops/pool_resize.hpp"
#include "ledcnet/profiler/profiler.hpp"
#include "ledcnet/train/checkpoint.hpp"
#include "ledcnet/train/optimizer.hpp"
#include "ledcnet/train/scheduler.hpp"
#include "ledcnet/train/trainer.hpp"
