#pragma once

#include "spectral_screener/error.hpp"
#include "spectral_screener/estimate.hpp"
#include "spectral_screener/fpca.hpp"
#include "spectral_screener/harness/calibrate.hpp"
#include "spectral_screener/harness/config.hpp"
#include "spectral_screener/harness/experiments.hpp"
#include "spectral_screener/harness/fpca_io.hpp"
#include "spectral_screener/harness/report.hpp"
#include "spectral_screener/harness/stats.hpp"
#include "spectral_screener/harness/svg.hpp"
#include "spectral_screener/linalg.hpp"
#include "spectral_screener/models.hpp"
#include "spectral_screener/rng.hpp"
#include "spectral_screener/screen.hpp"
