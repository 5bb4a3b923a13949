#pragma once

#include "morphcp/binary_mask.hpp"
#include "morphcp/conformal.hpp"
#include "morphcp/data.hpp"
#include "morphcp/error.hpp"
#include "morphcp/io/image.hpp"
#include "morphcp/metrics.hpp"
#include "morphcp/morphology.hpp"
#include "morphcp/overlay.hpp"
#include "morphcp/pipeline.hpp"
#include "morphcp/random.hpp"
#include "morphcp/serialize.hpp"
#include "morphcp/structuring_element.hpp"
#include "morphcp/synth.hpp"
