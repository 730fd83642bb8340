#pragma once

// Everything except the HTTP synthesizer, which pulls in cpp-httplib.
#include "xsynth/common.hpp"
#include "xsynth/event_store.hpp"
#include "xsynth/embedding.hpp"
#include "xsynth/dts.hpp"
#include "xsynth/filters.hpp"
#include "xsynth/selector.hpp"
#include "xsynth/retrieval.hpp"
#include "xsynth/synthesis.hpp"
#include "xsynth/pipeline.hpp"
#include "xsynth/benchmark.hpp"
#include "xsynth/labeling.hpp"
#include "xsynth/config.hpp"
