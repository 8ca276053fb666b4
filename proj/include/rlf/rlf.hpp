#pragma once

#include "rlf/error.hpp"
#include "rlf/estimates.hpp"
#include "rlf/experiment.hpp"
#include "rlf/fields.hpp"
#include "rlf/flow.hpp"
#include "rlf/modulus.hpp"
#include "rlf/numerics.hpp"
#include "rlf/report.hpp"
#include "rlf/series.hpp"
