#pragma once

#include "fieldtrack/error.hpp"
#include "fieldtrack/rng.hpp"
#include "fieldtrack/geometry.hpp"
#include "fieldtrack/motion.hpp"
#include "fieldtrack/field_template.hpp"
#include "fieldtrack/keypoint_filter.hpp"
#include "fieldtrack/homography_filter.hpp"
#include "fieldtrack/calibration.hpp"
#include "fieldtrack/metrics.hpp"
#include "fieldtrack/simulator.hpp"
#include "fieldtrack/sequence.hpp"
#include "fieldtrack/pipeline.hpp"
#include "fieldtrack/io.hpp"
