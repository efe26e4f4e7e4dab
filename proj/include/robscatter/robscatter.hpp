#pragma once

#include "robscatter/error.hpp"
#include "robscatter/matrix.hpp"
#include "robscatter/matcore.hpp"
#include "robscatter/stats.hpp"
#include "robscatter/randgen.hpp"
#include "robscatter/types.hpp"
#include "robscatter/scatter.hpp"
#include "robscatter/subset_scatter.hpp"
#include "robscatter/symmetrize.hpp"
#include "robscatter/estimator.hpp"
#include "robscatter/plugin.hpp"
#include "robscatter/experiments.hpp"
#include "robscatter/selftest.hpp"
