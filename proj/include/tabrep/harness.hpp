#pragma once

#include "tabrep/harness/config.hpp"
#include "tabrep/harness/report.hpp"
#include "tabrep/harness/run.hpp"
