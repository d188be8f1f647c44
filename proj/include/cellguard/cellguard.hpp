#pragma once

#include "cellguard/config.hpp"
#include "cellguard/error.hpp"
#include "cellguard/eval.hpp"
#include "cellguard/features.hpp"
#include "cellguard/ga.hpp"
#include "cellguard/imaging.hpp"
#include "cellguard/pipeline.hpp"
#include "cellguard/roi.hpp"
#include "cellguard/segmentation.hpp"
#include "cellguard/stream.hpp"
#include "cellguard/svm.hpp"
#include "cellguard/synthetic.hpp"
