#pragma once

#include "angcn/error.hpp"
#include "angcn/linalg.hpp"
#include "angcn/rng.hpp"
#include "angcn/graph.hpp"
#include "angcn/spectral_basis.hpp"
#include "angcn/autodiff.hpp"
#include "angcn/optim.hpp"
#include "angcn/io.hpp"
#include "angcn/datasets.hpp"
#include "angcn/spectral_gcn.hpp"
#include "angcn/gepa.hpp"
#include "angcn/signal.hpp"
#include "angcn/localization.hpp"
#include "angcn/staggered.hpp"
#include "angcn/angcn.hpp"
