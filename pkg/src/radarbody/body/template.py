"""Procedural parametric body template.

Stands in for a licensed mesh asset: joints come from the built-in
topologies, vertices are sampled on capsules around the bones, skin weights
blend each vertex between the two joints of its bone, and shape directions
scale stature, limb lengths and girth.  Everything is deterministic per seed
and serializable to JSON.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError, FormatError
from ..seeding import seeded_rng
from . import topology as topo

MAX_SKIN_JOINTS = 4


@dataclass
class BodyTemplate:
    joint_names: list[str]
    parent: np.ndarray           # (N_J,) intp, parent[0] == -1
    rest_joints: np.ndarray      # (N_J, 3) meters
    rest_vertices: np.ndarray    # (N_V, 3) meters
    skin_weights: np.ndarray     # (N_V, N_J), rows sum to 1, <= 4 nonzero
    shape_dirs_joints: np.ndarray    # (N_beta, N_J, 3)
    shape_dirs_vertices: np.ndarray  # (N_beta, N_V, 3)
    # Compact skinning view derived from skin_weights (filled in __post_init__).
    skin_idx: np.ndarray = field(init=False)   # (N_V, 4) intp
    skin_w: np.ndarray = field(init=False)     # (N_V, 4)

    def __post_init__(self):
        self.validate()
        nv = self.n_vertices
        self.skin_idx = np.zeros((nv, MAX_SKIN_JOINTS), dtype=np.intp)
        self.skin_w = np.zeros((nv, MAX_SKIN_JOINTS))
        for v in range(nv):
            nz = np.flatnonzero(self.skin_weights[v])
            self.skin_idx[v, :len(nz)] = nz
            self.skin_w[v, :len(nz)] = self.skin_weights[v, nz]

    @property
    def n_joints(self) -> int:
        return self.rest_joints.shape[0]

    @property
    def n_vertices(self) -> int:
        return self.rest_vertices.shape[0]

    @property
    def n_shape(self) -> int:
        return self.shape_dirs_joints.shape[0]

    def validate(self) -> None:
        nj, nv = self.rest_joints.shape[0], self.rest_vertices.shape[0]
        if self.parent.shape != (nj,) or self.parent[0] != -1:
            raise ConfigurationError("parent array must be (N_J,) with root at index 0")
        if nj >= 2 and not np.all((self.parent[1:] >= 0) & (self.parent[1:] < np.arange(1, nj))):
            raise ConfigurationError("parents must precede children and form a single tree")
        if self.skin_weights.shape != (nv, nj):
            raise ConfigurationError(f"skin_weights shape {self.skin_weights.shape} != ({nv}, {nj})")
        if nv:
            sums = self.skin_weights.sum(axis=1)
            if np.max(np.abs(sums - 1.0)) > 1e-9:
                raise ConfigurationError("skin weight rows must sum to 1")
            if np.max((self.skin_weights != 0).sum(axis=1)) > MAX_SKIN_JOINTS:
                raise ConfigurationError(f"more than {MAX_SKIN_JOINTS} skin joints on a vertex")
        for arr in (self.rest_joints, self.rest_vertices, self.skin_weights,
                    self.shape_dirs_joints, self.shape_dirs_vertices):
            if not np.all(np.isfinite(arr)):
                raise ConfigurationError("template arrays must be finite")


def _bone_frame(axis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ref = np.array([0.0, 0.0, 1.0]) if abs(axis[2]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(axis, ref)
    u /= np.linalg.norm(u)
    return u, np.cross(axis, u)


def make_template(n_joints: int = 24, n_vertices: int = 400, n_shape: int = 10,
                  seed: int = 0) -> BodyTemplate:
    """Build a deterministic template for a supported topology.

    Vertices are distributed over bones proportionally to bone length and
    placed on the bone's capsule surface; each vertex is skinned to the
    bone's parent joint, blending toward the child joint near its end.
    """
    if n_vertices < 0 or n_shape < 0:
        raise ConfigurationError("n_vertices and n_shape must be non-negative")
    names, parents, rest_joints = topo.topology(n_joints)
    rng = seeded_rng("body-template", seed, n_joints, n_vertices, n_shape)

    bones = [(parents[j], j) for j in range(1, n_joints)]
    lengths = np.array([np.linalg.norm(rest_joints[c] - rest_joints[p]) for p, c in bones])
    # Largest-remainder allocation so vertex counts are exact and seed-free.
    if n_vertices and bones:
        quota = lengths / lengths.sum() * n_vertices
        counts = np.floor(quota).astype(int)
        order = np.argsort(-(quota - counts), kind="stable")
        counts[order[:n_vertices - counts.sum()]] += 1
    else:
        counts = np.zeros(len(bones), dtype=int)

    verts, radial, wpairs = [], [], []
    for (p, c), m in zip(bones, counts):
        if m == 0:
            continue
        start, end = rest_joints[p], rest_joints[c]
        axis = (end - start) / np.linalg.norm(end - start)
        u, w = _bone_frame(axis)
        girth = topo.bone_girth(names[c])
        t = rng.random(m)
        phi = rng.random(m) * 2.0 * np.pi
        rad = np.cos(phi)[:, None] * u + np.sin(phi)[:, None] * w
        verts.append(start + t[:, None] * (end - start) + girth * rad)
        radial.append(rad)
        # Parent-dominant blend; child influence ramps over the last 40% of the bone.
        wc = 0.5 * np.clip((t - 0.6) / 0.4, 0.0, 1.0)
        wpairs.append(np.stack([np.full(m, p), np.full(m, c), 1.0 - wc, wc], axis=1))

    if verts:
        rest_vertices = np.concatenate(verts)
        radial_units = np.concatenate(radial)
        pairs = np.concatenate(wpairs)
    else:
        rest_vertices = np.zeros((0, 3))
        radial_units = np.zeros((0, 3))
        pairs = np.zeros((0, 4))

    nv = rest_vertices.shape[0]
    skin = np.zeros((nv, n_joints))
    for v in range(nv):
        p, c, wp, wc = pairs[v]
        skin[v, int(p)] += wp
        skin[v, int(c)] += wc

    dirs_j = np.zeros((n_shape, n_joints, 3))
    dirs_v = np.zeros((n_shape, nv, 3))
    limb = np.array([name.startswith(topo.LIMB_JOINT_PREFIXES) for name in names])
    for k in range(n_shape):
        if k == 0:        # stature: uniform scale about the pelvis
            dirs_j[k] = 0.06 * rest_joints
            dirs_v[k] = 0.06 * rest_vertices
        elif k == 1:      # limb length
            dirs_j[k][limb] = 0.07 * rest_joints[limb]
            dirs_v[k] = skin @ dirs_j[k]
        elif k == 2:      # girth: radial offset, joints unaffected
            dirs_v[k] = 0.03 * radial_units
        else:             # seeded smooth residual directions
            dirs_j[k] = rng.normal(scale=0.02, size=(n_joints, 3))
            dirs_j[k][0] = 0.0
            dirs_v[k] = skin @ dirs_j[k]

    return BodyTemplate(names, parents, rest_joints, rest_vertices, skin,
                        dirs_j, dirs_v)


def template_to_json(template: BodyTemplate, path) -> None:
    doc = {
        "joint_names": template.joint_names,
        "parent": template.parent.tolist(),
        "rest_joints": template.rest_joints.tolist(),
        "rest_vertices": template.rest_vertices.tolist(),
        "skin_weights": template.skin_weights.tolist(),
        "shape_dirs_joints": template.shape_dirs_joints.tolist(),
        "shape_dirs_vertices": template.shape_dirs_vertices.tolist(),
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True))


def template_from_json(path) -> BodyTemplate:
    try:
        doc = json.loads(Path(path).read_text())
        nj = len(doc["joint_names"])
        n_shape = len(doc["shape_dirs_joints"])
        nv = len(doc["rest_vertices"])
        return BodyTemplate(
            list(doc["joint_names"]),
            np.asarray(doc["parent"], dtype=np.intp),
            np.asarray(doc["rest_joints"], dtype=np.float64).reshape(nj, 3),
            np.asarray(doc["rest_vertices"], dtype=np.float64).reshape(nv, 3),
            np.asarray(doc["skin_weights"], dtype=np.float64).reshape(nv, nj),
            np.asarray(doc["shape_dirs_joints"], dtype=np.float64).reshape(n_shape, nj, 3),
            np.asarray(doc["shape_dirs_vertices"], dtype=np.float64).reshape(n_shape, nv, 3),
        )
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise FormatError(f"invalid template JSON: {exc}") from exc
