#pragma once

#include "fdaclass/basis.hpp"
#include "fdaclass/classifiers.hpp"
#include "fdaclass/datasets.hpp"
#include "fdaclass/distances.hpp"
#include "fdaclass/errors.hpp"
#include "fdaclass/fpca.hpp"
#include "fdaclass/numeric.hpp"
#include "fdaclass/report.hpp"
#include "fdaclass/rng.hpp"
#include "fdaclass/simulate.hpp"
#include "fdaclass/tuning.hpp"
#include "fdaclass/version.hpp"
