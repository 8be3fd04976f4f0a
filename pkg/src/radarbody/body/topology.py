"""Built-in kinematic trees.

Coordinate frame everywhere in this repo: x lateral, y depth away from the
radar, z vertical up, units in meters.  Rest poses are T-poses with the
pelvis at the origin; parent indices always precede their children so chains
can be evaluated in index order.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError

# 24-joint humanoid (SMPL-style joint set).
_JOINTS_24 = [
    # name,        parent, rest position (x, y, z)
    ("pelvis",      -1, (0.00, 0.00, 0.00)),
    ("l_hip",        0, (0.09, 0.00, -0.07)),
    ("r_hip",        0, (-0.09, 0.00, -0.07)),
    ("spine1",       0, (0.00, 0.00, 0.11)),
    ("l_knee",       1, (0.10, 0.00, -0.48)),
    ("r_knee",       2, (-0.10, 0.00, -0.48)),
    ("spine2",       3, (0.00, 0.00, 0.24)),
    ("l_ankle",      4, (0.10, 0.00, -0.87)),
    ("r_ankle",      5, (-0.10, 0.00, -0.87)),
    ("spine3",       6, (0.00, 0.00, 0.36)),
    ("l_foot",       7, (0.10, 0.12, -0.93)),
    ("r_foot",       8, (-0.10, 0.12, -0.93)),
    ("neck",         9, (0.00, 0.00, 0.50)),
    ("l_collar",     9, (0.06, 0.00, 0.45)),
    ("r_collar",     9, (-0.06, 0.00, 0.45)),
    ("head",        12, (0.00, 0.00, 0.64)),
    ("l_shoulder",  13, (0.18, 0.00, 0.47)),
    ("r_shoulder",  14, (-0.18, 0.00, 0.47)),
    ("l_elbow",     16, (0.44, 0.00, 0.47)),
    ("r_elbow",     17, (-0.44, 0.00, 0.47)),
    ("l_wrist",     18, (0.68, 0.00, 0.47)),
    ("r_wrist",     19, (-0.68, 0.00, 0.47)),
    ("l_hand",      20, (0.77, 0.00, 0.47)),
    ("r_hand",      21, (-0.77, 0.00, 0.47)),
]

# 17-joint skeleton for lower-resolution capture rigs (H36M-style joint set).
_JOINTS_17 = [
    ("pelvis",      -1, (0.00, 0.00, 0.00)),
    ("r_hip",        0, (-0.09, 0.00, -0.07)),
    ("r_knee",       1, (-0.10, 0.00, -0.48)),
    ("r_ankle",      2, (-0.10, 0.00, -0.90)),
    ("l_hip",        0, (0.09, 0.00, -0.07)),
    ("l_knee",       4, (0.10, 0.00, -0.48)),
    ("l_ankle",      5, (0.10, 0.00, -0.90)),
    ("spine",        0, (0.00, 0.00, 0.24)),
    ("thorax",       7, (0.00, 0.00, 0.45)),
    ("neck",         8, (0.00, 0.00, 0.53)),
    ("head",         9, (0.00, 0.00, 0.66)),
    ("l_shoulder",   8, (0.18, 0.00, 0.47)),
    ("l_elbow",     11, (0.44, 0.00, 0.47)),
    ("l_wrist",     12, (0.68, 0.00, 0.47)),
    ("r_shoulder",   8, (-0.18, 0.00, 0.47)),
    ("r_elbow",     14, (-0.44, 0.00, 0.47)),
    ("r_wrist",     15, (-0.68, 0.00, 0.47)),
]

# Bone girth in meters, keyed by child-joint name; fallback is 0.05.
_GIRTH = {
    "l_hip": 0.09, "r_hip": 0.09, "spine1": 0.12, "spine2": 0.13, "spine3": 0.13,
    "spine": 0.12, "thorax": 0.13, "l_knee": 0.07, "r_knee": 0.07,
    "l_ankle": 0.05, "r_ankle": 0.05, "l_foot": 0.04, "r_foot": 0.04,
    "neck": 0.06, "head": 0.09, "l_collar": 0.06, "r_collar": 0.06,
    "l_shoulder": 0.06, "r_shoulder": 0.06, "l_elbow": 0.045, "r_elbow": 0.045,
    "l_wrist": 0.04, "r_wrist": 0.04, "l_hand": 0.035, "r_hand": 0.035,
}

LIMB_JOINT_PREFIXES = ("l_", "r_")


def topology(n_joints: int) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Return (names, parents, rest_joints) for a supported joint count.

    24 and 17 are humanoid rigs; any other count >= 2 yields a plain serial
    chain (used by micro-scale tests), with 0.1 m links along +z.
    """
    if n_joints == 24:
        table = _JOINTS_24
    elif n_joints == 17:
        table = _JOINTS_17
    elif n_joints >= 2:
        names = ["root"] + [f"link{i}" for i in range(1, n_joints)]
        parents = np.array([-1] + list(range(n_joints - 1)), dtype=np.intp)
        rest = np.zeros((n_joints, 3))
        rest[:, 2] = 0.1 * np.arange(n_joints)
        return names, parents, rest
    else:
        raise ConfigurationError(f"no built-in topology for n_joints={n_joints} (need >= 2)")
    names = [row[0] for row in table]
    parents = np.array([row[1] for row in table], dtype=np.intp)
    rest = np.array([row[2] for row in table], dtype=np.float64)
    return names, parents, rest


def bone_girth(child_name: str) -> float:
    return _GIRTH.get(child_name, 0.05)
