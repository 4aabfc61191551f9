#pragma once

// umbrella header

#include "pcc/bitstream.hpp"
#include "pcc/checkpoint.hpp"
#include "pcc/codec.hpp"
#include "pcc/common.hpp"
#include "pcc/dataset.hpp"
#include "pcc/entropy.hpp"
#include "pcc/mesh_io.hpp"
#include "pcc/metrics.hpp"
#include "pcc/nn.hpp"
#include "pcc/range_coder.hpp"
#include "pcc/recon.hpp"
#include "pcc/rng.hpp"
#include "pcc/sampling.hpp"
#include "pcc/serialize.hpp"
#include "pcc/synthetic.hpp"
#include "pcc/tensor.hpp"
#include "pcc/training.hpp"
