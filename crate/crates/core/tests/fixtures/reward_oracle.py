"""Reference evaluation of the reward terms, used to freeze reward_cases.json.

Run from this directory: python3 reward_oracle.py > reward_cases.json
Everything here is computed from the closed forms with plain floats; nothing is
shared with the Rust implementation.
"""

import json
import math

DT = 0.02

CONFIG = {
    "c_h": 0.85,
    "c_feet": [[0.0, 0.12, -0.85], [0.0, -0.12, -0.85]],
    "c_feet_rpy": [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
    "c_arm": [0.3, -0.3],
    "t_max": [100.0, 100.0, 50.0, 50.0],
    "grace": 0.2,
    "airtime_threshold": 0.4,
}
W = dict(vel_x=0.15, vel_y=0.15, yaw=0.1, rollpitch=0.2, feet_contact=0.1, base_height=0.05,
         feet_airtime=1.0, feet_orientation=0.05, feet_position=0.05, arm=0.03, base_accel=0.1,
         action_diff=0.02, torque=0.02)
TERMS = list(W)


def quat_rpy(r, p, y):
    cr, sr = math.cos(r / 2), math.sin(r / 2)
    cp, sp = math.cos(p / 2), math.sin(p / 2)
    cy, sy = math.cos(y / 2), math.sin(y / 2)
    return [cr * cp * cy + sr * sp * sy,
            sr * cp * cy - cr * sp * sy,
            cr * sp * cy + sr * cp * sy,
            cr * cp * sy - sr * sp * cy]


def wrap(a):
    a = math.fmod(a + math.pi, 2 * math.pi)
    if a <= 0:
        a += 2 * math.pi
    return a - math.pi


def base_obs():
    return {
        "torso_rpy": [0.0, 0.0, 0.0],
        "base_pos": [0.0, 0.0, CONFIG["c_h"]],
        "base_linvel": [0.0, 0.0, 0.0],
        "base_acc": [0.0, 0.0, 0.0],
        "foot_pos": [list(CONFIG["c_feet"][0]), list(CONFIG["c_feet"][1])],
        "foot_rpy": [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
        "arm_pos": list(CONFIG["c_arm"]),
        "applied_torque": [0.0] * 4,
        "action": [0.1, -0.2, 0.3, 0.0],
        "prev_action": [0.1, -0.2, 0.3, 0.0],
    }


def cmd(cx=0.0, cy=0.0, cyaw=0.0, heading=0.0):
    return {"c_x": cx, "c_y": cy, "c_yaw": cyaw, "heading": heading}


def standing(c):
    return c["c_x"] == 0 and c["c_y"] == 0 and c["c_yaw"] == 0


def evaluate(o, c, contacts):
    r, p, y = o["torso_rpy"]
    out = {}
    # velocity in the heading frame: rotate world velocity by -yaw
    vx, vy, _ = o["base_linvel"]
    hx = math.cos(y) * vx + math.sin(y) * vy
    hy = -math.sin(y) * vx + math.cos(y) * vy
    for key, v, target in (("vel_x", hx, c["c_x"]), ("vel_y", hy, c["c_y"])):
        e = v - target
        out[key] = math.exp(-5 * abs(e)) if standing(c) else math.exp(-5 * e * e)
    # yaw: distance between the heading quaternions, 1 - cos^2(half angle)
    half = (y - c["heading"]) / 2
    out["yaw"] = math.exp(-300 * (1 - math.cos(half) ** 2))
    # roll-pitch part of a Z-Y-X orientation has scalar part cos(r/2) cos(p/2)
    w = math.cos(r / 2) * math.cos(p / 2)
    out["rollpitch"] = math.exp(-30 * (1 - w * w))
    # contact term over the step history
    n = len(contacts) - 1
    window = round(CONFIG["grace"] / DT)
    single = [k for k in range(n + 1) if contacts[k][0] != contacts[k][1]]
    recent = any(n - k <= window for k in single)
    out["feet_contact"] = 1.0 if standing(c) or recent else 0.0
    out["base_height"] = math.exp(-20 * abs(o["base_pos"][2] - CONFIG["c_h"]))
    # airtime: a foot landing at the last step pays (steps off the ground) * dt - threshold
    if standing(c):
        out["feet_airtime"] = 1.0
    else:
        s = 0.0
        for f in range(2):
            if n >= 1 and contacts[n][f] and not contacts[n - 1][f]:
                k = n - 1
                off = 0
                while k >= 1 and not contacts[k][f]:
                    off += 1
                    k -= 1
                s += off * DT - CONFIG["airtime_threshold"]
        out["feet_airtime"] = s
    err = 0.0
    for f in range(2):
        fr = o["foot_rpy"][f]
        cr = CONFIG["c_feet_rpy"][f]
        err += abs(fr[0] - cr[0]) + abs(fr[1] - cr[1])
        if c["c_yaw"] == 0:
            err += abs(wrap(fr[2] - cr[2]))
    out["feet_orientation"] = math.exp(-err)
    if standing(c):
        off = sum(abs(o["foot_pos"][f][k] - CONFIG["c_feet"][f][k]) for f in range(2) for k in range(3))
        out["feet_position"] = math.exp(-3 * off)
    else:
        out["feet_position"] = 1.0
    out["arm"] = math.exp(-3 * math.sqrt(sum((a - b) ** 2 for a, b in zip(o["arm_pos"], CONFIG["c_arm"]))))
    out["base_accel"] = math.exp(-0.01 * sum(abs(b) for b in o["base_acc"]))
    out["action_diff"] = math.exp(-0.02 * sum(abs(a - b) for a, b in zip(o["action"], o["prev_action"])))
    ratios = [abs(t) / m for t, m in zip(o["applied_torque"], CONFIG["t_max"])]
    out["torque"] = math.exp(-0.02 * sum(ratios) / len(ratios))
    out["total"] = sum(W[k] * out[k] for k in TERMS)
    return out


DOUBLE = [[True, True]]
cases = []


def case(name, term, c, contacts=None, stated=None, **obs):
    o = base_obs()
    for k, v in obs.items():
        o[k] = v
    contacts = contacts or DOUBLE * 2
    values = evaluate(o, c, contacts)
    entry = {"name": name, "term": term, "obs": o, "cmd": c, "contacts": contacts, "expected": values[term]}
    if term == "total":
        entry["terms"] = {k: values[k] for k in TERMS}
    if stated is not None:
        entry["stated"] = stated
    cases.append(entry)


def heading_world(yaw, hx, hy):
    return [math.cos(yaw) * hx - math.sin(yaw) * hy, math.sin(yaw) * hx + math.cos(yaw) * hy, 0.0]


single_then = lambda steps_ago: [[True, True]] * 3 + [[True, False]] + [[True, True]] * steps_ago

# velocity
case("walking vx 1.0 cmd 0.5", "vel_x", cmd(0.5), base_linvel=[1.0, 0.0, 0.0], stated=0.2865)
case("standing vx 0.2", "vel_x", cmd(), base_linvel=[0.2, 0.0, 0.0], stated=0.3679)
case("standing vx -0.2 uses abs", "vel_x", cmd(), base_linvel=[-0.2, 0.0, 0.0], stated=0.3679)
case("exact tracking", "vel_x", cmd(1.0), base_linvel=[1.0, 0.0, 0.0], stated=1.0)
case("walking vy error 0.5", "vel_y", cmd(0.3, 0.2), base_linvel=[0.3, -0.3, 0.0])
case("heading frame x", "vel_x", cmd(0.8, 0.1), torso_rpy=[0.0, 0.0, 0.7],
     base_linvel=heading_world(0.7, 0.6, 0.3))
case("heading frame y", "vel_y", cmd(0.8, 0.1), torso_rpy=[0.0, 0.0, 0.7],
     base_linvel=heading_world(0.7, 0.6, 0.3))
# yaw and roll-pitch
case("yaw error 0.1", "yaw", cmd(), torso_rpy=[0.0, 0.0, 0.1], stated=0.4727)
case("yaw error across the wrap", "yaw", cmd(heading=-3.1), torso_rpy=[0.0, 0.0, 3.1])
case("pitched torso at heading", "yaw", cmd(heading=1.0), torso_rpy=[0.0, 0.3, 1.0], stated=1.0)
case("pitch error 0.2", "rollpitch", cmd(), torso_rpy=[0.0, 0.2, 0.0], stated=0.7416)
case("roll and pitch under yaw", "rollpitch", cmd(), torso_rpy=[0.1, -0.15, 2.0])
case("level torso", "rollpitch", cmd(), torso_rpy=[0.0, 0.0, -1.3], stated=1.0)
# contact
case("standing double support", "feet_contact", cmd(), stated=1.0)
case("single contact 0.1 s ago", "feet_contact", cmd(0.5), contacts=single_then(5), stated=1.0)
case("double support for 0.5 s", "feet_contact", cmd(0.5), contacts=DOUBLE * 26, stated=0.0)
case("single contact exactly 0.2 s ago", "feet_contact", cmd(0.5), contacts=single_then(10), stated=1.0)
case("single contact 0.22 s ago", "feet_contact", cmd(0.5), contacts=single_then(11), stated=0.0)
case("flight after single contact", "feet_contact", cmd(0.5),
     contacts=[[True, True], [True, False], [False, False], [False, False]], stated=1.0)
# base height
case("height 5 cm high", "base_height", cmd(), base_pos=[0.0, 0.0, CONFIG["c_h"] + 0.05], stated=0.3679)
case("height 10 cm low", "base_height", cmd(), base_pos=[0.0, 0.0, CONFIG["c_h"] - 0.10], stated=0.1353)
case("height on target", "base_height", cmd(), stated=1.0)
# airtime
lift = lambda steps: [[True, True]] + [[False, True]] * steps + [[True, True]]
case("standing airtime", "feet_airtime", cmd(), stated=1.0)
case("touchdown after 0.4 s", "feet_airtime", cmd(0.5), contacts=lift(20), stated=0.0)
case("touchdown after 0.6 s", "feet_airtime", cmd(0.5), contacts=lift(30), stated=0.2)
case("touchdown after 0.1 s", "feet_airtime", cmd(0.5), contacts=lift(5), stated=-0.3)
case("both feet land together", "feet_airtime", cmd(0.5),
     contacts=[[True, True]] + [[False, True]] * 20 + [[False, False]] * 15 + [[True, True]])
case("no touchdown this step", "feet_airtime", cmd(0.5), contacts=lift(12)[:-1], stated=0.0)
# feet orientation
case("standing foot yawed 0.3", "feet_orientation", cmd(), foot_rpy=[[0.0, 0.0, 0.3], [0.0, 0.0, 0.0]],
     stated=0.7408)
case("rotating with yawed feet", "feet_orientation", cmd(0.0, 0.0, 0.4), foot_rpy=[[0.0, 0.0, 0.5], [0.0, 0.0, -0.5]],
     stated=1.0)
case("walking roll pitch yaw errors", "feet_orientation", cmd(0.6),
     foot_rpy=[[0.1, -0.2, 0.0], [0.0, 0.0, -0.1]])
case("rotating keeps roll error", "feet_orientation", cmd(0.0, 0.0, -0.3),
     foot_rpy=[[0.1, 0.0, 0.5], [0.0, 0.0, 0.0]])
# feet position
case("standing offset 0.2 m", "feet_position", cmd(),
     foot_pos=[[0.05, 0.12, -0.80], [0.0, -0.22, -0.85]], stated=0.5488)
case("walking ignores stance", "feet_position", cmd(0.5), foot_pos=[[0.3, 0.2, -0.7], [-0.3, -0.1, -0.9]],
     stated=1.0)
case("standing at nominal stance", "feet_position", cmd(), stated=1.0)
# arm
case("one arm joint off 0.5", "arm", cmd(), arm_pos=[0.8, -0.3], stated=0.2231)
case("arm error 0.3 and 0.4", "arm", cmd(), arm_pos=[0.6, -0.7])
case("arms at nominal", "arm", cmd(), stated=1.0)
# acceleration, action smoothness, torque
case("sum abs accel 100", "base_accel", cmd(), base_acc=[30.0, -50.0, 20.0], stated=0.3679)
case("no acceleration", "base_accel", cmd(), stated=1.0)
case("action change 5", "action_diff", cmd(), action=[1.1, -2.2, 0.3, 1.0], prev_action=[0.1, -0.2, 0.3, 0.0])
case("identical actions", "action_diff", cmd(), stated=1.0)
case("all motors at half limit", "torque", cmd(), applied_torque=[50.0, -50.0, 25.0, -25.0], stated=0.9900)
case("mixed torque ratios", "torque", cmd(), applied_torque=[20.0, -100.0, 0.0, 30.0])
case("zero torque", "torque", cmd(), stated=1.0)
# totals
case("perfect standing", "total", cmd(), stated=2.02)
case("all bounded terms maximal while walking", "total", cmd(0.5, 0.0, 0.0),
     contacts=single_then(2), base_linvel=[0.5, 0.0, 0.0], stated=1.02)
case("general walking step with touchdown", "total", cmd(0.7, -0.1, 0.2, heading=0.4),
     torso_rpy=[0.05, -0.08, 0.45], base_pos=[1.0, -0.5, 0.81], base_linvel=[0.55, 0.2, 0.05],
     base_acc=[3.0, -1.0, 9.0], foot_pos=[[0.2, 0.1, -0.8], [-0.15, -0.14, -0.78]],
     foot_rpy=[[0.02, -0.1, 0.3], [0.0, 0.05, -0.2]], arm_pos=[0.1, -0.5],
     applied_torque=[40.0, -80.0, 10.0, 45.0], action=[0.3, -0.1, 0.2, 0.05],
     contacts=[[True, True]] + [[True, False]] * 24 + [[True, True]])
case("general standing step", "total", cmd(heading=-2.0),
     torso_rpy=[-0.03, 0.04, -2.05], base_pos=[0.0, 0.0, 0.88], base_linvel=[0.05, -0.02, 0.0],
     base_acc=[0.5, 0.2, -1.0], foot_pos=[[0.01, 0.13, -0.86], [-0.02, -0.1, -0.85]],
     foot_rpy=[[0.0, 0.01, 0.05], [0.01, 0.0, -0.04]], arm_pos=[0.35, -0.25],
     applied_torque=[5.0, -3.0, 2.0, 1.0])

print(json.dumps({"dt": DT, "config": CONFIG, "weights": W, "cases": cases}, indent=1))
