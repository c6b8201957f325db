"""Writes reference transitions for the classic-control environments.

Each line is `state... | action | next_state... | done`, computed with the
Gym 0.14 update equations transcribed here independently of the Rust code.
Run from this directory: python3 gen_physics.py
"""
import math
import random


def mountain_car(state, action):
    position, velocity = state
    velocity += (action - 1) * 0.001 + math.cos(3 * position) * (-0.0025)
    velocity = min(max(velocity, -0.07), 0.07)
    position += velocity
    position = min(max(position, -1.2), 0.6)
    if position == -1.2 and velocity < 0:
        velocity = 0.0
    return [position, velocity], position >= 0.5


def cart_pole(state, action):
    gravity, masscart, masspole, length, force_mag, tau = 9.8, 1.0, 0.1, 0.5, 10.0, 0.02
    total_mass = masspole + masscart
    polemass_length = masspole * length
    x, x_dot, theta, theta_dot = state
    force = force_mag if action == 1 else -force_mag
    costheta, sintheta = math.cos(theta), math.sin(theta)
    temp = (force + polemass_length * theta_dot * theta_dot * sintheta) / total_mass
    thetaacc = (gravity * sintheta - costheta * temp) / (
        length * (4.0 / 3.0 - masspole * costheta * costheta / total_mass))
    xacc = temp - polemass_length * thetaacc * costheta / total_mass
    x = x + tau * x_dot
    x_dot = x_dot + tau * xacc
    theta = theta + tau * theta_dot
    theta_dot = theta_dot + tau * thetaacc
    done = x < -2.4 or x > 2.4 or theta < -12 * 2 * math.pi / 360 or theta > 12 * 2 * math.pi / 360
    return [x, x_dot, theta, theta_dot], done


def write(path, rows):
    with open(path, "w") as f:
        for state, action, nxt, done in rows:
            f.write(" ".join(repr(v) for v in state))
            f.write(f" | {action} | ")
            f.write(" ".join(repr(v) for v in nxt))
            f.write(f" | {int(done)}\n")


rng = random.Random(20200425)
rows = []
for s in [[-1.19, -0.05], [0.49, 0.05], [-0.5, 0.0], [0.55, 0.07]]:
    for a in range(3):
        rows.append((s, a, *mountain_car(s, a)))
for _ in range(6):
    s = [rng.uniform(-1.2, 0.6), rng.uniform(-0.07, 0.07)]
    a = rng.randrange(3)
    rows.append((s, a, *mountain_car(s, a)))
write("mountain_car.txt", rows)

rows = []
for s in [[0.0, 0.0, 0.0, 0.0], [2.39, 1.0, 0.0, 0.0], [0.0, 0.0, 0.2, 1.0]]:
    for a in range(2):
        rows.append((s, a, *cart_pole(s, a)))
for _ in range(6):
    s = [rng.uniform(-2.4, 2.4), rng.uniform(-2, 2), rng.uniform(-0.2, 0.2), rng.uniform(-2, 2)]
    a = rng.randrange(2)
    rows.append((s, a, *cart_pole(s, a)))
write("cart_pole.txt", rows)
