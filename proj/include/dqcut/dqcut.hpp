#pragma once

#include "dqcut/errors.hpp"
#include "dqcut/linalg.hpp"
#include "dqcut/model.hpp"
#include "dqcut/qcqp.hpp"
#include "dqcut/separation.hpp"
#include "dqcut/relax.hpp"
#include "dqcut/bnb.hpp"
#include "dqcut/metrics.hpp"
#include "dqcut/generate.hpp"
#include "dqcut/batch.hpp"
