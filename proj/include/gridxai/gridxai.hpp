#pragma once

#include "gridxai/core_model.hpp"
#include "gridxai/explain.hpp"
#include "gridxai/ingest.hpp"
#include "gridxai/regress.hpp"
#include "gridxai/report.hpp"
#include "gridxai/severity.hpp"
#include "gridxai/watchdog.hpp"
