#include "mimic/sim.hpp"

#include <algorithm>
#include <cmath>

namespace mimic {
namespace {

bool finite(double v) { return std::isfinite(v); }
bool finite(const Vec2& v) { return finite(v.x) && finite(v.y); }

struct ContactPoint {
    int body = -1;
    Vec2 local;          // collision point, body frame
    double target_vn = 0.0;  // restitution bias
    double impulse_n = 0.0;
    double impulse_t = 0.0;
};

Vec2 point_velocity(const RigidBody& b, const Vec2& r_world) {
    // r_world: offset from COM to the point, world frame
    return b.linear_velocity + b.angular_velocity * r_world.perp();
}

// Effective-mass solve for a point impulse between bodies a and b at world
// offsets ra, rb from the respective COMs. Returns the impulse that changes
// the relative anchor velocity by dv.
Vec2 solve_point_impulse(const RigidBody& a, const RigidBody& b, const Vec2& ra, const Vec2& rb,
                         const Vec2& dv) {
    const double ima = a.inv_mass(), imb = b.inv_mass();
    const double iia = a.inv_inertia(), iib = b.inv_inertia();
    const double k11 = ima + imb + iia * ra.y * ra.y + iib * rb.y * rb.y;
    const double k12 = -iia * ra.x * ra.y - iib * rb.x * rb.y;
    const double k22 = ima + imb + iia * ra.x * ra.x + iib * rb.x * rb.x;
    const double det = k11 * k22 - k12 * k12;
    return {(k22 * dv.x - k12 * dv.y) / det, (k11 * dv.y - k12 * dv.x) / det};
}

void apply_impulse(RigidBody& a, RigidBody& b, const Vec2& ra, const Vec2& rb, const Vec2& p) {
    a.linear_velocity -= a.inv_mass() * p;
    a.angular_velocity -= a.inv_inertia() * cross(ra, p);
    b.linear_velocity += b.inv_mass() * p;
    b.angular_velocity += b.inv_inertia() * cross(rb, p);
}

void validate_inputs(const WorldState& w, const Eigen::VectorXd& torques) {
    if (static_cast<size_t>(torques.size()) != w.joints.size())
        throw SimError("step: torque vector length " + std::to_string(torques.size()) +
                       " does not match joint count " + std::to_string(w.joints.size()));
    for (Eigen::Index i = 0; i < torques.size(); ++i)
        if (!finite(torques[i]))
            throw SimError("step: non-finite torque at joint '" +
                           w.joints[static_cast<size_t>(i)].name + "'");
    for (const auto& b : w.bodies)
        if (!finite(b.position) || !finite(b.angle) || !finite(b.linear_velocity) ||
            !finite(b.angular_velocity))
            throw SimError("step: non-finite state on body '" + b.name + "'");
}

}  // namespace

Eigen::VectorXd WorldState::joint_angles() const {
    Eigen::VectorXd q(static_cast<Eigen::Index>(joints.size()));
    for (size_t j = 0; j < joints.size(); ++j) q[static_cast<Eigen::Index>(j)] = joint_angle(static_cast<int>(j));
    return q;
}

Eigen::VectorXd WorldState::joint_velocities() const {
    Eigen::VectorXd dq(static_cast<Eigen::Index>(joints.size()));
    for (size_t j = 0; j < joints.size(); ++j) dq[static_cast<Eigen::Index>(j)] = joint_velocity(static_cast<int>(j));
    return dq;
}

Vec2 WorldState::joint_residual(int j) const {
    const auto& jt = joints[static_cast<size_t>(j)];
    const auto& pa = bodies[static_cast<size_t>(jt.parent_body)];
    const auto& ch = bodies[static_cast<size_t>(jt.child_body)];
    const Vec2 wa = pa.position + rotate(jt.anchor_parent, pa.angle);
    const Vec2 wb = ch.position + rotate(jt.anchor_child, ch.angle);
    return wb - wa;
}

double WorldState::max_joint_residual() const {
    double m = 0.0;
    for (size_t j = 0; j < joints.size(); ++j)
        m = std::max(m, joint_residual(static_cast<int>(j)).norm());
    return m;
}

void step(WorldState& world, const Eigen::VectorXd& joint_torques) {
    validate_inputs(world, joint_torques);

    const SimConfig& cfg = world.config;
    const double dt = cfg.dt_sim;

    // Integrate velocities: gravity plus actuation torques (equal and
    // opposite on parent and child).
    for (auto& b : world.bodies) b.linear_velocity.y -= dt * cfg.gravity;
    for (size_t j = 0; j < world.joints.size(); ++j) {
        const auto& jt = world.joints[j];
        const double tau = joint_torques[static_cast<Eigen::Index>(j)];
        world.bodies[static_cast<size_t>(jt.child_body)].angular_velocity +=
            dt * tau * world.bodies[static_cast<size_t>(jt.child_body)].inv_inertia();
        world.bodies[static_cast<size_t>(jt.parent_body)].angular_velocity -=
            dt * tau * world.bodies[static_cast<size_t>(jt.parent_body)].inv_inertia();
    }

    // Ground contact candidates: rod endpoints that are already near the
    // ground or will cross it within this step.
    constexpr double kContactMargin = 1e-3;
    constexpr double kRestitutionVelThreshold = 0.05;
    std::vector<ContactPoint> contacts;
    for (size_t bi = 0; bi < world.bodies.size(); ++bi) {
        const auto& b = world.bodies[bi];
        if (b.half_length < 0.0) continue;
        for (int e = 0; e < 2; ++e) {
            const double sgn = e == 0 ? -1.0 : 1.0;
            const Vec2 local{sgn * b.half_length, 0.0};
            const Vec2 pw = b.position + rotate(local, b.angle);
            const Vec2 r = pw - b.position;
            const double vn = point_velocity(b, r).y;
            if (pw.y + dt * vn < cfg.ground_height + kContactMargin) {
                ContactPoint c;
                c.body = static_cast<int>(bi);
                c.local = local;
                if (cfg.restitution > 0.0 && vn < -kRestitutionVelThreshold)
                    c.target_vn = -cfg.restitution * vn;
                contacts.push_back(c);
            }
        }
    }

    // Sequential impulse velocity iterations: joints, joint limits, contacts.
    RigidBody ground;  // static proxy for ground contacts
    ground.mass = std::numeric_limits<double>::infinity();
    ground.inertia = std::numeric_limits<double>::infinity();

    for (int it = 0; it < cfg.solver_iterations; ++it) {
        for (const auto& jt : world.joints) {
            auto& pa = world.bodies[static_cast<size_t>(jt.parent_body)];
            auto& ch = world.bodies[static_cast<size_t>(jt.child_body)];
            const Vec2 ra = rotate(jt.anchor_parent, pa.angle);
            const Vec2 rb = rotate(jt.anchor_child, ch.angle);
            const Vec2 rel = point_velocity(ch, rb) - point_velocity(pa, ra);
            const Vec2 p = solve_point_impulse(pa, ch, ra, rb, -rel);
            apply_impulse(pa, ch, ra, rb, p);
        }
        for (size_t j = 0; j < world.joints.size(); ++j) {
            const auto& jt = world.joints[j];
            auto& pa = world.bodies[static_cast<size_t>(jt.parent_body)];
            auto& ch = world.bodies[static_cast<size_t>(jt.child_body)];
            const double q = world.joint_angle(static_cast<int>(j));
            const double dq = ch.angular_velocity - pa.angular_velocity;
            const double k = 1.0 / (pa.inv_inertia() + ch.inv_inertia());
            if (q <= jt.limit_lo && dq < 0.0) {
                const double lambda = -k * dq;
                pa.angular_velocity -= pa.inv_inertia() * lambda;
                ch.angular_velocity += ch.inv_inertia() * lambda;
            } else if (q >= jt.limit_hi && dq > 0.0) {
                const double lambda = -k * dq;
                pa.angular_velocity -= pa.inv_inertia() * lambda;
                ch.angular_velocity += ch.inv_inertia() * lambda;
            }
        }
        for (auto& c : contacts) {
            auto& b = world.bodies[static_cast<size_t>(c.body)];
            const Vec2 r = rotate(c.local, b.angle);
            const Vec2 v = point_velocity(b, r);
            // Normal (y): accumulated impulse clamped to be repulsive.
            const double kn = 1.0 / (b.inv_mass() + b.inv_inertia() * r.x * r.x);
            const double dn = kn * (c.target_vn - v.y);
            const double new_n = std::max(0.0, c.impulse_n + dn);
            const double applied_n = new_n - c.impulse_n;
            c.impulse_n = new_n;
            apply_impulse(ground, b, {0, 0}, r, {0.0, applied_n});
            // Coulomb friction (x), clamped by the accumulated normal impulse.
            const Vec2 v2 = point_velocity(b, r);
            const double kt = 1.0 / (b.inv_mass() + b.inv_inertia() * r.y * r.y);
            const double dtimp = kt * (0.0 - v2.x);
            const double max_t = cfg.friction_coeff * c.impulse_n;
            const double new_t = std::clamp(c.impulse_t + dtimp, -max_t, max_t);
            const double applied_t = new_t - c.impulse_t;
            c.impulse_t = new_t;
            apply_impulse(ground, b, {0, 0}, r, {applied_t, 0.0});
        }
    }

    // Integrate positions.
    for (auto& b : world.bodies) {
        b.position += dt * b.linear_velocity;
        b.angle += dt * b.angular_velocity;
    }

    // Positional correction (nonlinear Gauss-Seidel). Velocities untouched.
    constexpr double kPenetrationSlop = 1e-3;
    constexpr double kMaxCorrection = 0.2;
    const double beta = cfg.baumgarte_beta;
    for (int it = 0; it < cfg.solver_iterations; ++it) {
        for (const auto& jt : world.joints) {
            auto& pa = world.bodies[static_cast<size_t>(jt.parent_body)];
            auto& ch = world.bodies[static_cast<size_t>(jt.child_body)];
            const Vec2 ra = rotate(jt.anchor_parent, pa.angle);
            const Vec2 rb = rotate(jt.anchor_child, ch.angle);
            Vec2 c = (ch.position + rb) - (pa.position + ra);
            const double n = c.norm();
            if (n > kMaxCorrection) c = c * (kMaxCorrection / n);
            const Vec2 p = solve_point_impulse(pa, ch, ra, rb, -beta * c);
            pa.position -= pa.inv_mass() * p;
            pa.angle -= pa.inv_inertia() * cross(ra, p);
            ch.position += ch.inv_mass() * p;
            ch.angle += ch.inv_inertia() * cross(rb, p);
        }
        for (size_t j = 0; j < world.joints.size(); ++j) {
            const auto& jt = world.joints[j];
            auto& pa = world.bodies[static_cast<size_t>(jt.parent_body)];
            auto& ch = world.bodies[static_cast<size_t>(jt.child_body)];
            const double q = world.joint_angle(static_cast<int>(j));
            double violation = 0.0;
            if (q < jt.limit_lo) violation = jt.limit_lo - q;
            else if (q > jt.limit_hi) violation = jt.limit_hi - q;
            if (violation != 0.0) {
                const double k = 1.0 / (pa.inv_inertia() + ch.inv_inertia());
                const double lambda = beta * violation * k;
                pa.angle -= pa.inv_inertia() * lambda;
                ch.angle += ch.inv_inertia() * lambda;
            }
        }
        for (const auto& c : contacts) {
            auto& b = world.bodies[static_cast<size_t>(c.body)];
            const Vec2 r = rotate(c.local, b.angle);
            const Vec2 pw = b.position + r;
            const double pen = cfg.ground_height - pw.y;
            if (pen > kPenetrationSlop) {
                const double corr = std::min(beta * (pen - kPenetrationSlop), kMaxCorrection);
                const double kn = 1.0 / (b.inv_mass() + b.inv_inertia() * r.x * r.x);
                const double p = corr * kn;
                b.position.y += b.inv_mass() * p;
                b.angle += b.inv_inertia() * r.x * p;
            }
        }
    }

    world.time += dt;
}

Eigen::VectorXd apply_pd(const Eigen::VectorXd& gains_p, const Eigen::VectorXd& gains_d,
                         const Eigen::VectorXd& pd_target, const Eigen::VectorXd& joint_angles,
                         const Eigen::VectorXd& joint_velocities, double torque_clamp) {
    const Eigen::Index n = gains_p.size();
    if (gains_d.size() != n || pd_target.size() != n || joint_angles.size() != n ||
        joint_velocities.size() != n)
        throw SimError("apply_pd: vector length mismatch");
    Eigen::VectorXd tau = gains_p.cwiseProduct(pd_target - joint_angles) -
                          gains_d.cwiseProduct(joint_velocities);
    if (torque_clamp > 0.0)
        tau = tau.cwiseMax(-torque_clamp).cwiseMin(torque_clamp);
    return tau;
}

void control_step(WorldState& world, const Eigen::VectorXd& pd_target) {
    Eigen::VectorXd kp(static_cast<Eigen::Index>(world.joints.size()));
    Eigen::VectorXd kd(static_cast<Eigen::Index>(world.joints.size()));
    for (size_t j = 0; j < world.joints.size(); ++j) {
        kp[static_cast<Eigen::Index>(j)] = world.joints[j].gain_p;
        kd[static_cast<Eigen::Index>(j)] = world.joints[j].gain_d;
    }
    for (int s = 0; s < world.config.control_decimation; ++s) {
        const Eigen::VectorXd tau = apply_pd(kp, kd, pd_target, world.joint_angles(),
                                             world.joint_velocities(), world.config.torque_clamp);
        step(world, tau);
    }
}

double mechanical_energy(const WorldState& world) {
    double e = 0.0;
    for (const auto& b : world.bodies) {
        e += 0.5 * b.mass * b.linear_velocity.norm_sq();
        e += 0.5 * b.inertia * b.angular_velocity * b.angular_velocity;
        e += b.mass * world.config.gravity * b.position.y;
    }
    return e;
}

}  // namespace mimic
