#pragma once

#include "apgarch/config.hpp"
#include "apgarch/diagnostics.hpp"
#include "apgarch/errors.hpp"
#include "apgarch/estimation.hpp"
#include "apgarch/experiments.hpp"
#include "apgarch/io.hpp"
#include "apgarch/model.hpp"
#include "apgarch/numerics.hpp"
#include "apgarch/optimizer.hpp"
#include "apgarch/report.hpp"
