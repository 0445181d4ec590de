#pragma once

#include <vector>

namespace sbikit {

// Parameter and summary-statistic vectors are plain std::vector<double>;
// Eigen types appear only where linear algebra actually happens.
using ParamVector = std::vector<double>;
using SummaryVector = std::vector<double>;

}  // namespace sbikit
