#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mimic/vec2.hpp"

namespace mimic {

struct SimError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Maximal-coordinate rigid body. Rod geometry along local x, centered at the
// COM; endpoints at (+-half_length, 0) are the ground-collision points.
struct RigidBody {
    std::string name;
    Vec2 position;             // COM, world frame (m)
    double angle = 0.0;        // rad
    Vec2 linear_velocity;      // m/s
    double angular_velocity = 0.0;  // rad/s
    double mass = 1.0;         // kg
    double inertia = 1.0;      // kg*m^2
    double half_length = 0.0;  // m

    double inv_mass() const { return 1.0 / mass; }
    double inv_inertia() const { return 1.0 / inertia; }
    Vec2 endpoint(int which) const {  // which: 0 = proximal (-x), 1 = distal (+x)
        const double sgn = which == 0 ? -1.0 : 1.0;
        return position + rotate({sgn * half_length, 0.0}, angle);
    }
};

// Revolute joint pinning anchor_child (child body frame) to anchor_parent
// (parent body frame). Joint angle is measured as
//   q = wrap(child.angle - parent.angle - rest_angle)
// and is held inside [limit_lo, limit_hi] by unilateral constraints.
struct RevoluteJoint {
    std::string name;
    int parent_body = -1;
    int child_body = -1;
    Vec2 anchor_parent;
    Vec2 anchor_child;
    double limit_lo = -M_PI;
    double limit_hi = M_PI;
    double rest_angle = 0.0;
    double gain_p = 0.0;  // PD gains used by control_step
    double gain_d = 0.0;
};

struct SimConfig {
    double dt_sim = 1.0 / 60.0;
    int control_decimation = 2;  // control at 30 Hz
    double gravity = 9.81;       // magnitude, acts along -y
    int solver_iterations = 16;
    double baumgarte_beta = 0.2;  // position-correction relaxation per iteration
    double friction_coeff = 1.0;
    double restitution = 0.0;
    double ground_height = 0.0;  // m
    double torque_clamp = 200.0;  // N*m, symmetric per-joint clamp
};

struct WorldState {
    std::vector<RigidBody> bodies;
    std::vector<RevoluteJoint> joints;
    SimConfig config;
    double time = 0.0;

    double joint_angle(int j) const {
        const auto& jt = joints[static_cast<size_t>(j)];
        return wrap_angle(bodies[static_cast<size_t>(jt.child_body)].angle -
                          bodies[static_cast<size_t>(jt.parent_body)].angle - jt.rest_angle);
    }
    double joint_velocity(int j) const {
        const auto& jt = joints[static_cast<size_t>(j)];
        return bodies[static_cast<size_t>(jt.child_body)].angular_velocity -
               bodies[static_cast<size_t>(jt.parent_body)].angular_velocity;
    }
    Eigen::VectorXd joint_angles() const;
    Eigen::VectorXd joint_velocities() const;

    // World-frame separation of the two anchor points of joint j.
    Vec2 joint_residual(int j) const;
    double max_joint_residual() const;
};

// Advances one dt_sim with the given per-joint torques (child positive,
// parent reaction negative). Semi-implicit Euler; joint/limit/ground
// constraints resolved by sequential impulses plus a positional
// correction pass. Throws SimError on non-finite torque or state,
// naming the offending joint/body.
void step(WorldState& world, const Eigen::VectorXd& joint_torques);

// tau_i = kp_i * (target_i - q_i) - kd_i * qdot_i, clamped to
// [-torque_clamp, torque_clamp] when torque_clamp > 0.
Eigen::VectorXd apply_pd(const Eigen::VectorXd& gains_p, const Eigen::VectorXd& gains_d,
                         const Eigen::VectorXd& pd_target, const Eigen::VectorXd& joint_angles,
                         const Eigen::VectorXd& joint_velocities, double torque_clamp = 0.0);

// Runs control_decimation simulator substeps with the PD target held fixed.
// PD torques are recomputed from the live joint state each substep.
void control_step(WorldState& world, const Eigen::VectorXd& pd_target);

// Total kinetic + gravitational potential energy (for conservation tests).
double mechanical_energy(const WorldState& world);

}  // namespace mimic
