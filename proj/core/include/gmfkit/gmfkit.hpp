#pragma once

#include "gmfkit/derivatives.hpp"
#include "gmfkit/errors.hpp"
#include "gmfkit/family.hpp"
#include "gmfkit/glm.hpp"
#include "gmfkit/identify.hpp"
#include "gmfkit/init.hpp"
#include "gmfkit/io.hpp"
#include "gmfkit/linalg.hpp"
#include "gmfkit/metrics.hpp"
#include "gmfkit/model.hpp"
#include "gmfkit/optim.hpp"
#include "gmfkit/parallel.hpp"
#include "gmfkit/select.hpp"
#include "gmfkit/simulate.hpp"
#include "gmfkit/version.hpp"
