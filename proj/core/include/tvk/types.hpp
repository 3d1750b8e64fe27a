#pragma once

#include <Eigen/Dense>

namespace tvk {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

}  // namespace tvk
