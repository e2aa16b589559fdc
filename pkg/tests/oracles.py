"""Independent reference implementations the tests compare against.

None of these import the code under test's numerics; they are written from
first principles (textbook DH parameters, brute force, closed forms) so that
agreement is meaningful.
"""

import numpy as np

# Franka Panda, modified (Craig) DH convention: a_{i-1}, d_i, alpha_{i-1}
PANDA_DH_A = [0.0, 0.0, 0.0, 0.0825, -0.0825, 0.0, 0.088]
PANDA_DH_D = [0.333, 0.0, 0.316, 0.0, 0.384, 0.0, 0.0]
PANDA_DH_ALPHA = [0.0, -np.pi / 2, np.pi / 2, np.pi / 2, -np.pi / 2, np.pi / 2, np.pi / 2]
PANDA_FLANGE_D = 0.107
PANDA_TCP_D = 0.1034


def _mdh(a, d, alpha, theta):
    ca, sa, ct, st = np.cos(alpha), np.sin(alpha), np.cos(theta), np.sin(theta)
    return np.array(
        [
            [ct, -st, 0.0, a],
            [st * ca, ct * ca, -sa, -d * sa],
            [st * sa, ct * sa, ca, d * ca],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def _trans_z(d):
    T = np.eye(4)
    T[2, 3] = d
    return T


def _rot_z(t):
    T = np.eye(4)
    T[:2, :2] = [[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]]
    return T


def dh_link_frames(q):
    """World frames of links 1..7 from the textbook DH table."""
    T = np.eye(4)
    out = []
    for i in range(7):
        T = T @ _mdh(PANDA_DH_A[i], PANDA_DH_D[i], PANDA_DH_ALPHA[i], q[i])
        out.append(T.copy())
    return out


def dh_end_effector(q):
    """Tool frame: link 7, 0.107 m to the flange, -45 deg about z, 0.1034 m to the fingertip center."""
    return dh_link_frames(q)[-1] @ _trans_z(PANDA_FLANGE_D) @ _rot_z(-np.pi / 4) @ _trans_z(PANDA_TCP_D)


def central_jacobian(fun, q, h=1e-6):
    """Central finite-difference Jacobian of a vector function of q."""
    q = np.asarray(q, dtype=float)
    f0 = np.atleast_1d(fun(q))
    J = np.zeros((f0.size, q.size))
    for j in range(q.size):
        e = np.zeros_like(q)
        e[j] = h
        J[:, j] = (np.atleast_1d(fun(q + e)) - np.atleast_1d(fun(q - e))) / (2 * h)
    return J


def brute_nearest(points, queries):
    """Nearest-neighbour distance and index by exhaustive scan."""
    d = np.linalg.norm(queries[:, None, :] - points[None, :, :], axis=2)
    i = np.argmin(d, axis=1)
    return d[np.arange(len(queries)), i], i


def brute_dynamic(prev, curr, tau):
    """Indices of curr whose nearest prev point is farther than tau."""
    d, _ = brute_nearest(prev, curr)
    return np.flatnonzero(d > tau)


def brute_closest_to_spheres(points, centers, radii):
    """(point index, sphere index, signed distance) of the globally closest pair, scanning every pair."""
    best = (None, None, np.inf)
    for i, p in enumerate(points):
        for s, (c, r) in enumerate(zip(centers, radii)):
            d = np.sqrt(np.sum((p - c) ** 2)) - r
            if d < best[2]:
                best = (i, s, d)
    return best


def semi_implicit_euler(q, qdot, qddot, n, dt):
    """Closed form of n semi-implicit Euler steps under constant acceleration."""
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    a = np.asarray(qddot, dtype=float)
    return q + n * dt * qdot + a * dt * dt * n * (n + 1) / 2.0, qdot + n * dt * a


def critically_damped_envelope(e0, v0, omega, t):
    """|e(t)| bound for e'' + 2 w e' + w^2 e = 0: (|e0| + (|v0| + w |e0|) t) exp(-w t)."""
    return (abs(e0) + (abs(v0) + omega * abs(e0)) * t) * np.exp(-omega * t)


def geodesic_angle_deg(R1, R2):
    """Rotation angle of R1^T R2 from its trace."""
    c = (np.trace(R1.T @ R2) - 1.0) / 2.0
    return np.degrees(np.arccos(np.clip(c, -1.0, 1.0)))


def sample_sphere_surface(rng, center, radius, n):
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return center + radius * v


def sample_box_surface(rng, center, half, n):
    half = np.asarray(half, dtype=float)
    areas = np.array([half[1] * half[2], half[0] * half[2], half[0] * half[1]] * 2)
    face = rng.choice(6, size=n, p=areas / areas.sum())
    u = rng.uniform(-1, 1, size=(n, 3)) * half
    ax = face % 3
    u[np.arange(n), ax] = np.where(face < 3, -1.0, 1.0) * half[ax]
    return center + u


def in_box(x, center, half):
    return np.all(np.abs(x - center) <= half, axis=-1)


def sampling_collides(rng, sphere_centers, sphere_radii, obstacles, n=100_000):
    """Dense-sampling collision oracle.

    Contact between a robot sphere and a primitive happens iff some surface
    point of one lies inside the other, or one contains the other's center.
    Both surfaces are sampled with ``n`` points in total.
    """
    per = max(1, n // (2 * len(sphere_radii)))
    for c, r in zip(sphere_centers, sphere_radii):
        surf = sample_sphere_surface(rng, c, r, per)
        for kind, oc, size in obstacles:
            if kind == "box":
                if in_box(surf, oc, size).any() or in_box(c, oc, size):
                    return True
            else:
                if (np.linalg.norm(surf - oc, axis=1) <= size).any() or np.linalg.norm(c - oc) <= size:
                    return True
    per_ob = max(1, n // (2 * max(1, len(obstacles))))
    for kind, oc, size in obstacles:
        surf = sample_box_surface(rng, oc, size, per_ob) if kind == "box" else sample_sphere_surface(rng, oc, size, per_ob)
        d = np.linalg.norm(surf[:, None, :] - sphere_centers[None, :, :], axis=2)
        if (d <= sphere_radii[None, :]).any():
            return True
    return False
