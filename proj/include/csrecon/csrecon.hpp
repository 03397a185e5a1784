#pragma once

#include "csrecon/benchmark.hpp"
#include "csrecon/bp.hpp"
#include "csrecon/config.hpp"
#include "csrecon/dictionary.hpp"
#include "csrecon/error.hpp"
#include "csrecon/gradient.hpp"
#include "csrecon/image.hpp"
#include "csrecon/omp.hpp"
#include "csrecon/operators.hpp"
#include "csrecon/pipeline.hpp"
#include "csrecon/random.hpp"
#include "csrecon/transforms.hpp"
#include "csrecon/tv.hpp"
