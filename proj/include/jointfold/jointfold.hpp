#pragma once

#include "jointfold/cloud_io.hpp"
#include "jointfold/core_geometry.hpp"
#include "jointfold/errors.hpp"
#include "jointfold/fusion.hpp"
#include "jointfold/isomap.hpp"
#include "jointfold/manifold_models.hpp"
#include "jointfold/parallel.hpp"
#include "jointfold/reach.hpp"
#include "jointfold/rng.hpp"
#include "jointfold/separation.hpp"
