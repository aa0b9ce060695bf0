#pragma once

#include <hgr/error.hpp>
#include <hgr/core.hpp>
#include <hgr/dsp.hpp>
#include <hgr/spectrum.hpp>
#include <hgr/features.hpp>
#include <hgr/session_io.hpp>
#include <hgr/feature_io.hpp>
#include <hgr/quality.hpp>
#include <hgr/stats.hpp>
#include <hgr/classify/standardize.hpp>
#include <hgr/classify/lda.hpp>
#include <hgr/classify/svm.hpp>
#include <hgr/classify/dbi.hpp>
#include <hgr/classify/cv.hpp>
#include <hgr/synth/synth.hpp>
#include <hgr/pipeline.hpp>
#include <hgr/report.hpp>
#include <hgr/config.hpp>
