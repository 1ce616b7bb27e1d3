#pragma once

#include "gridxai/regress/metrics.hpp"
#include "gridxai/regress/model.hpp"
#include "gridxai/regress/model_io.hpp"
#include "gridxai/regress/tree.hpp"
