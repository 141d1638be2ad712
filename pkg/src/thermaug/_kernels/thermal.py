"""Explicit-Euler stepping of the room/wall/actuator network.

State layout: [room, wall, act_0 .. act_{A-1}] in degC. An active actuator
relaxes toward its setpoint and exchanges heat with the room; an inactive
one is decoupled from the room and drifts toward room temperature.
"""

from __future__ import annotations

import numpy as np

from .._accel import USE_NUMBA, njit


def euler_numpy(x0, t_out, setpoints, active, c_room, c_wall, g_rw, g_wo, gains, tau, dt):
    n = t_out.shape[0]
    traj = np.empty((n + 1, x0.shape[0]))
    traj[0] = x0
    x = x0.copy()
    sp = np.where(np.isnan(setpoints), 0.0, setpoints)
    for t in range(n):
        room, wall, act = x[0], x[1], x[2:]
        on = active[t]
        q_act = np.where(on, gains * (act - room), 0.0).sum()
        d_room = (g_rw * (wall - room) + q_act) / c_room
        d_wall = (g_rw * (room - wall) + g_wo * (t_out[t] - wall)) / c_wall
        d_act = np.where(on, sp - act, room - act) / tau
        x = np.concatenate(((room + dt * d_room, wall + dt * d_wall), act + dt * d_act))
        traj[t + 1] = x
    return traj


@njit
def euler_numba(x0, t_out, setpoints, active, c_room, c_wall, g_rw, g_wo, gains, tau, dt):
    n = t_out.shape[0]
    na = gains.shape[0]
    traj = np.empty((n + 1, x0.shape[0]))
    traj[0] = x0
    x = x0.copy()
    for t in range(n):
        room = x[0]
        wall = x[1]
        q_act = 0.0
        for j in range(na):
            if active[t, j]:
                q_act += gains[j] * (x[2 + j] - room)
        d_room = (g_rw * (wall - room) + q_act) / c_room
        d_wall = (g_rw * (room - wall) + g_wo * (t_out[t] - wall)) / c_wall
        for j in range(na):
            a = x[2 + j]
            if active[t, j]:
                x[2 + j] = a + dt * (setpoints[j] - a) / tau
            else:
                x[2 + j] = a + dt * (room - a) / tau
        x[0] = room + dt * d_room
        x[1] = wall + dt * d_wall
        traj[t + 1] = x
    return traj


euler = euler_numba if USE_NUMBA else euler_numpy
