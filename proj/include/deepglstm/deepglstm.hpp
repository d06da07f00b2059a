#pragma once

#include "autodiff.hpp"
#include "checkpoint.hpp"
#include "datasets.hpp"
#include "featurizer.hpp"
#include "gradcheck.hpp"
#include "graph_ops.hpp"
#include "lstm.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "model_gradcheck.hpp"
#include "optim.hpp"
#include "protein_codec.hpp"
#include "repurpose.hpp"
#include "rng.hpp"
#include "smiles.hpp"
#include "tensor.hpp"
#include "training.hpp"
