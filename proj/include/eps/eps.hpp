#pragma once

// Umbrella header for the EPS library.

#include "eps/errors.hpp"
#include "eps/rational.hpp"
#include "eps/validation.hpp"
#include "eps/survey_model.hpp"
#include "eps/assessment_flow.hpp"
#include "eps/scoring.hpp"
#include "eps/review.hpp"
#include "eps/recommendation.hpp"
#include "eps/report.hpp"
#include "eps/store.hpp"
