#pragma once

#include "safescore/analysis.hpp"
#include "safescore/csv.hpp"
#include "safescore/errors.hpp"
#include "safescore/fixture.hpp"
#include "safescore/forest.hpp"
#include "safescore/importance.hpp"
#include "safescore/ingest.hpp"
#include "safescore/io.hpp"
#include "safescore/kinematics.hpp"
#include "safescore/kmeans.hpp"
#include "safescore/metrics.hpp"
#include "safescore/report.hpp"
#include "safescore/rng.hpp"
#include "safescore/schema.hpp"
#include "safescore/scoring.hpp"
#include "safescore/shap.hpp"
#include "safescore/types.hpp"
#include "safescore/version.hpp"
