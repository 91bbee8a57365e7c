#pragma once

#include "disent/clustering.hpp"
#include "disent/common.hpp"
#include "disent/dataset.hpp"
#include "disent/losses.hpp"
#include "disent/metrics.hpp"
#include "disent/models.hpp"
#include "disent/nn.hpp"
#include "disent/optim.hpp"
#include "disent/report.hpp"
#include "disent/snnl.hpp"
#include "disent/stopwords.hpp"
#include "disent/text.hpp"
