#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace evsim {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

// Rigid pose, world-from-body.
struct Pose {
    Vec3 position = Vec3::Zero();
    Quat orientation = Quat::Identity();
};

// Throws ValidationError unless |q| is within 1e-6 of one.
void check_unit_quaternion(const Quat& q, const char* what);

}  // namespace evsim
