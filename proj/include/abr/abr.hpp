#pragma once

// Umbrella header.

#include "abr/aggregate.hpp"
#include "abr/backend.hpp"
#include "abr/config.hpp"
#include "abr/cross_validation.hpp"
#include "abr/dataset.hpp"
#include "abr/feature_cache.hpp"
#include "abr/features.hpp"
#include "abr/image.hpp"
#include "abr/metrics.hpp"
#include "abr/pipeline.hpp"
#include "abr/preprocess.hpp"
#include "abr/roc.hpp"
#include "abr/svm.hpp"
#include "abr/svm_io.hpp"
