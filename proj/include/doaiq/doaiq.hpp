#pragma once

#include "doaiq/agp.hpp"
#include "doaiq/candidates.hpp"
#include "doaiq/csv.hpp"
#include "doaiq/design_io.hpp"
#include "doaiq/encoding.hpp"
#include "doaiq/errors.hpp"
#include "doaiq/factors.hpp"
#include "doaiq/linreg.hpp"
#include "doaiq/maxpro.hpp"
#include "doaiq/metrics.hpp"
#include "doaiq/oracle.hpp"
#include "doaiq/pipeline.hpp"
#include "doaiq/rng.hpp"
#include "doaiq/simplex.hpp"
