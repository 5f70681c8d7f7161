#pragma once

#include "sentinel/deviation_detector.hpp"
#include "sentinel/errors.hpp"
#include "sentinel/evaluation.hpp"
#include "sentinel/head_analysis.hpp"
#include "sentinel/head_features.hpp"
#include "sentinel/json_io.hpp"
#include "sentinel/parallel.hpp"
#include "sentinel/phase_labeler.hpp"
#include "sentinel/sim/apf.hpp"
#include "sentinel/sim/costmap.hpp"
#include "sentinel/sim/kinematics.hpp"
#include "sentinel/sim/rewards.hpp"
#include "sentinel/sim/rollback.hpp"
#include "sentinel/sim/smoother.hpp"
#include "sentinel/sim/world.hpp"
#include "sentinel/synth.hpp"
#include "sentinel/trace.hpp"
#include "sentinel/trace_io.hpp"
