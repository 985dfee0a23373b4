#pragma once

#include "hota/data.hpp"
#include "hota/errors.hpp"
#include "hota/model.hpp"
#include "hota/normal.hpp"
#include "hota/numdiff.hpp"
#include "hota/optimize.hpp"
#include "hota/oracles.hpp"
#include "hota/priors.hpp"
#include "hota/profile.hpp"
#include "hota/random.hpp"
#include "hota/spline.hpp"
#include "hota/summary.hpp"
#include "hota/tail_area.hpp"
#include "hota/transform.hpp"
