#pragma once

#include "otafl/bounds.hpp"
#include "otafl/channel.hpp"
#include "otafl/config.hpp"
#include "otafl/data.hpp"
#include "otafl/errors.hpp"
#include "otafl/experiments.hpp"
#include "otafl/learning.hpp"
#include "otafl/report.hpp"
#include "otafl/rng.hpp"
#include "otafl/scheduler.hpp"
