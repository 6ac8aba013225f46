"""Robot models, scene generators, and scene/robot file serialization.

Scene and robot documents are JSON with a fixed schema (see `save_scene`
and `save_robot`); floats round-trip exactly because they are written with
full precision. Generators are deterministic functions of their spec,
including the RNG seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParams, ParseError, ValidationError
from .geometry import ContactSurface, Polytope, Scene, _freeze

SCENE_KINDS = ("bridge", "stairs", "rubbles", "rubbles_stairs", "explicit")


@dataclass(frozen=True)
class Pose:
    """Root position and yaw (roll/pitch are fixed to zero)."""

    position: np.ndarray
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", _freeze(np.asarray(self.position, float).reshape(3)))


@dataclass(frozen=True)
class RobotModel:
    """Per-effector constraint polytopes plus root-motion bounds.

    All polytopes are expressed in a frame aligned with the root yaw:
    `rom[k]` bounds foot-minus-root, `com_kin[k]` bounds com-minus-foot,
    `rel_foot[k]` bounds next-foot-minus-foot for the effector that follows
    k in the gait, and `foot_shape[k]` is the xy support polygon of foot k
    relative to its center.
    """

    name: str
    n_feet: int
    gait: tuple[int, ...]
    foot_shape: tuple[Polytope, ...]
    rom: tuple[Polytope, ...]
    com_kin: tuple[Polytope, ...]
    rel_foot: tuple[Polytope, ...]
    com_vel_max: np.ndarray
    com_acc_max: np.ndarray
    nominal_root_height: float
    stance_offsets: np.ndarray  # (n_feet, 2) xy offsets in the root frame
    quad_weights: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "gait", tuple(int(g) for g in self.gait))
        object.__setattr__(self, "com_vel_max", _freeze(self.com_vel_max))
        object.__setattr__(self, "com_acc_max", _freeze(self.com_acc_max))
        object.__setattr__(self, "stance_offsets", _freeze(np.asarray(self.stance_offsets, float).reshape(self.n_feet, 2)))
        self.validate()

    def validate(self) -> None:
        if self.n_feet not in (2, 4):
            raise ValidationError("n_feet must be 2 or 4")
        if sorted(self.gait) != list(range(self.n_feet)):
            raise ValidationError("gait must visit every effector exactly once per cycle")
        for group, name in ((self.foot_shape, "foot_shape"), (self.rom, "rom"),
                            (self.com_kin, "com_kin"), (self.rel_foot, "rel_foot")):
            if len(group) != self.n_feet:
                raise ValidationError(f"{name} must have one polytope per effector")
        if np.any(self.com_vel_max <= 0) or np.any(self.com_acc_max <= 0):
            raise ValidationError("com velocity/acceleration bounds must be positive")
        if self.quad_weights is not None:
            for i, w in enumerate(self.quad_weights):
                w = np.asarray(w, dtype=float)
                if len(w) != self.n_feet or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
                    raise ValidationError(f"quad_weights[{i}] must be nonnegative and sum to 1")

    def validate_polytopes(self) -> None:
        """Boundedness / interior LP checks; separate because they cost LPs."""
        for group, name in ((self.rom, "rom"), (self.com_kin, "com_kin"), (self.rel_foot, "rel_foot")):
            for k, poly in enumerate(group):
                poly.validate(f"{self.name}.{name}[{k}]")

    def next_in_gait(self, effector: int) -> int:
        i = self.gait.index(effector)
        return self.gait[(i + 1) % self.n_feet]

    def phase_weights(self, phase: int) -> np.ndarray:
        if self.quad_weights is not None:
            return np.asarray(self.quad_weights[phase % len(self.quad_weights)], dtype=float)
        return np.full(self.n_feet, 1.0 / self.n_feet)


def _foot_polytope(half_x: float, half_y: float) -> Polytope:
    A = np.array([[1.0, 0, 0], [-1.0, 0, 0], [0, 1.0, 0], [0, -1.0, 0]])
    return Polytope(A, np.array([half_x, half_x, half_y, half_y]))


def default_biped() -> RobotModel:
    """Box-polytope biped stand-in; left effector 0, right effector 1."""
    rom = (Polytope.box([-0.35, 0.0, -1.1], [0.35, 0.5, -0.6]),     # left foot
           Polytope.box([-0.35, -0.5, -1.1], [0.35, 0.0, -0.6]))    # right foot
    com_kin = (Polytope.box([-0.25, -0.25, 0.5], [0.25, 0.25, 1.0]),) * 2
    rel = (Polytope.box([-0.45, -0.6, -0.35], [0.45, -0.1, 0.35]),  # right rel. left
           Polytope.box([-0.45, 0.1, -0.35], [0.45, 0.6, 0.35]))    # left rel. right
    return RobotModel(
        name="biped-default",
        n_feet=2,
        gait=(0, 1),
        foot_shape=(_foot_polytope(0.1, 0.06),) * 2,
        rom=rom,
        com_kin=com_kin,
        rel_foot=rel,
        com_vel_max=np.array([0.2, 0.12, 0.12]),
        com_acc_max=np.array([0.35, 0.25, 0.25]),
        nominal_root_height=0.85,
        stance_offsets=np.array([[0.0, 0.1], [0.0, -0.1]]),
    )


def default_quadruped() -> RobotModel:
    """Crawl-gait quadruped stand-in: LF=0, RF=1, LH=2, RH=3."""
    shoulders = np.array([[0.37, 0.2], [0.37, -0.2], [-0.37, 0.2], [-0.37, -0.2]])
    rom = tuple(Polytope.box([sx - 0.3, sy - 0.18, -0.75], [sx + 0.3, sy + 0.18, -0.35])
                for sx, sy in shoulders)
    com_kin = tuple(Polytope.box([-sx - 0.35, -sy - 0.3, 0.3], [-sx + 0.35, -sy + 0.3, 0.8])
                    for sx, sy in shoulders)
    gait = (0, 3, 1, 2)  # crawl: LF, RH, RF, LH
    rel = []
    for k in range(4):
        nxt = gait[(gait.index(k) + 1) % 4]
        d = shoulders[nxt] - shoulders[k]
        rel.append(Polytope.box([d[0] - 0.3, d[1] - 0.25, -0.3], [d[0] + 0.3, d[1] + 0.25, 0.3]))
    return RobotModel(
        name="quadruped-default",
        n_feet=4,
        gait=gait,
        foot_shape=(_foot_polytope(0.04, 0.04),) * 4,
        rom=rom,
        com_kin=com_kin,
        rel_foot=tuple(rel),
        com_vel_max=np.array([0.12, 0.08, 0.08]),
        com_acc_max=np.array([0.3, 0.2, 0.2]),
        nominal_root_height=0.55,
        stance_offsets=shoulders,
        quad_weights=tuple((0.25, 0.25, 0.25, 0.25) for _ in range(4)),
    )


def named_robot(name: str) -> RobotModel:
    if name in ("biped", "biped-default"):
        return default_biped()
    if name in ("quadruped", "quad", "quadruped-default"):
        return default_quadruped()
    raise InvalidParams(f"unknown robot model '{name}'")


def stance_positions(scene: Scene, model: RobotModel, pose: Pose) -> tuple[np.ndarray, list[ContactSurface]]:
    """Feet dropped from the stance offsets onto the topmost surface below.

    Returns (n_feet, 3) world positions and the supporting surface of each.
    """
    c, s = np.cos(pose.yaw), np.sin(pose.yaw)
    positions = np.zeros((model.n_feet, 3))
    supports: list[ContactSurface] = []
    for k in range(model.n_feet):
        ox, oy = model.stance_offsets[k]
        x = pose.position[0] + c * ox - s * oy
        y = pose.position[1] + s * ox + c * oy
        surf = scene.surface_below(x, y)
        if surf is None:
            raise ValidationError(f"no surface under effector {k} at stance ({x:.3f}, {y:.3f})")
        positions[k] = (x, y, surf.height_at(x, y))
        supports.append(surf)
    return positions, supports


# ---------------------------------------------------------------------------
# Generators


@dataclass(frozen=True)
class SceneSpec:
    """Parameter record for the deterministic scene generators."""

    kind: str
    count: int = 7
    rise: float = 0.1
    run: float = 0.3
    tilt: float = 0.0
    seed: int = 0
    width: float = 1.4
    surfaces: tuple | None = None       # explicit kind: vertex lists
    start: tuple = (0.0, 0.0, 0.0)      # (x, y, yaw)
    goal: tuple | None = None
    friction: float = 0.5
    name: str | None = None


def _rect(sid: int, cx: float, cy: float, hx: float, hy: float, z: float) -> ContactSurface:
    verts = [[cx - hx, cy - hy, z], [cx + hx, cy - hy, z],
             [cx + hx, cy + hy, z], [cx - hx, cy + hy, z]]
    return ContactSurface.from_vertices(sid, verts)


def _tilted_pad(sid: int, center, half: float, roll: float, pitch: float) -> ContactSurface:
    from .geometry import rotation_to_normal
    n = np.array([np.sin(pitch), -np.sin(roll) * np.cos(pitch), np.cos(roll) * np.cos(pitch)])
    n /= np.linalg.norm(n)
    R = rotation_to_normal(n)
    base = np.array([[-half, -half, 0.0], [half, -half, 0.0],
                     [half, half, 0.0], [-half, half, 0.0]])
    return ContactSurface.from_vertices(sid, base @ R.T + np.asarray(center))


def _stairs_surfaces(spec: SceneSpec, sid0: int = 0, x0: float = 0.0, z0: float = 0.0):
    # A 4 cm nosing gap keeps adjacent treads strictly disjoint in x.
    gap = 0.04
    k, rise, run, hw = spec.count, spec.rise, spec.run, spec.width / 2
    surfaces = []
    x = x0
    for i in range(k):
        pitch = 1.0 if i in (0, k - 1) else run
        depth = pitch - gap
        surfaces.append(_rect(sid0 + i, x + gap + depth / 2, 0.0, depth / 2, hw,
                              z0 + i * rise))
        x += pitch
    return surfaces, x


def _rubbles_surfaces(spec: SceneSpec, sid0: int = 0, x0: float = 0.0):
    """A 2-column grid of k tilted pads marching along +x.

    Row pitch and column spans keep >= 2 cm xy clearance, so the pads are
    pairwise disjoint for any sampled tilt/height. Returns the surfaces,
    the x of the last full pad row (a valid stance row), and the x extent.
    """
    rng = np.random.default_rng(spec.seed)
    half = 0.19
    row_pitch = 0.42
    surfaces = []
    x_end = x0
    for i in range(spec.count):
        row, col = divmod(i, 2)
        cy = 0.2 if col == 0 else -0.2
        cx = x0 + row * row_pitch
        cz = float(rng.uniform(-0.04, 0.04))
        roll = float(rng.uniform(-spec.tilt, spec.tilt))
        pitch = float(rng.uniform(-spec.tilt, spec.tilt))
        surfaces.append(_tilted_pad(sid0 + i, (cx, cy, cz), half, roll, pitch))
        x_end = cx + half
    last_full_row_x = x0 + ((spec.count // 2) - 1) * row_pitch
    return surfaces, last_full_row_x, x_end


def generate_scene(spec: SceneSpec) -> tuple[Scene, Pose, Pose]:
    """Deterministic test environments; returns (scene, start, goal)."""
    if spec.kind not in SCENE_KINDS:
        raise InvalidParams(f"unknown scene kind '{spec.kind}'")
    if spec.count < 1:
        raise InvalidParams("surface count must be >= 1")
    if spec.tilt > np.arctan(spec.friction):
        raise InvalidParams("requested tilt violates quasi-flatness for the scene friction")

    name = spec.name or (spec.kind if spec.kind in ("bridge", "rubbles_stairs")
                         else f"{spec.kind}{spec.count}")
    if spec.kind == "stairs":
        surfaces, x_end = _stairs_surfaces(spec)
        start = Pose(np.array([0.5, 0.0, 0.0]))
        goal = Pose(np.array([x_end - 0.5, 0.0, 0.0]))
    elif spec.kind == "bridge":
        gap = 0.02
        beam_len, beam_hw = 1.6, 0.16
        surfaces = [
            _rect(0, 0.0, 0.0, 1.0, 1.0, 0.0),
            _rect(1, 1.0 + gap + beam_len / 2, 0.0, beam_len / 2, beam_hw, 0.0),
            _rect(2, 1.0 + 2 * gap + beam_len + 1.0, 0.0, 1.0, 1.0, 0.0),
        ]
        start = Pose(np.array([-0.3, 0.0, 0.0]))
        goal = Pose(np.array([2.3 + 2 * gap + beam_len - 1.0 + 0.3, 0.0, 0.0]))
    elif spec.kind == "rubbles":
        if spec.count < 4:
            raise InvalidParams("rubbles needs at least 4 pads for start/goal stances")
        surfaces, last_row_x, _ = _rubbles_surfaces(spec)
        start = Pose(np.array([0.0, 0.0, 0.0]))
        goal = Pose(np.array([last_row_x, 0.0, 0.0]))
        name = spec.name or f"rubbles{spec.count}"
    elif spec.kind == "rubbles_stairs":
        n_pads = max(spec.count - 4, 4)
        rub_spec = SceneSpec(kind="rubbles", count=n_pads, tilt=spec.tilt, seed=spec.seed)
        surfaces, _, x_end = _rubbles_surfaces(rub_spec)
        stair_spec = SceneSpec(kind="stairs", count=4, rise=spec.rise, run=spec.run,
                               width=spec.width)
        stairs, x2 = _stairs_surfaces(stair_spec, sid0=len(surfaces), x0=x_end + 0.08,
                                      z0=spec.rise)
        surfaces += stairs
        start = Pose(np.array([0.0, 0.0, 0.0]))
        goal = Pose(np.array([x2 - 0.5, 0.0, 0.0]))
    else:  # explicit
        if not spec.surfaces:
            raise InvalidParams("explicit scene requires a surface list")
        surfaces = [ContactSurface.from_vertices(i, v) for i, v in enumerate(spec.surfaces)]
        start = Pose(np.array([spec.start[0], spec.start[1], 0.0]), spec.start[2])
        g = spec.goal if spec.goal is not None else spec.start
        goal = Pose(np.array([g[0], g[1], 0.0]), g[2])
        return Scene(tuple(surfaces), friction=spec.friction, name=name), start, goal

    if spec.goal is not None:
        goal = Pose(np.array([spec.goal[0], spec.goal[1], 0.0]), spec.goal[2])
    scene = Scene(tuple(surfaces), friction=spec.friction, name=name)
    return scene, start, goal


def palette_scene(height: float = 0.1) -> tuple[Scene, Pose, Pose]:
    """Flat ground with a raised palette in the middle (quadruped demo)."""
    surfaces = [
        _rect(0, 0.0, 0.0, 0.55, 0.8, 0.0),
        _rect(1, 1.04, 0.0, 0.45, 0.7, height),
        _rect(2, 2.08, 0.0, 0.55, 0.8, 0.0),
    ]
    scene = Scene(tuple(surfaces), friction=0.5, name="palette")
    return scene, Pose(np.array([-0.05, 0.0, 0.0])), Pose(np.array([2.13, 0.0, 0.0]))


def named_scene(token: str) -> tuple[Scene, Pose, Pose]:
    """Shorthand names: bridge, stairs<k>, rubbles<k>, rubbles_stairs, palette."""
    if token == "bridge":
        return generate_scene(SceneSpec(kind="bridge"))
    if token == "palette":
        return palette_scene()
    if token == "rubbles_stairs":
        return generate_scene(SceneSpec(kind="rubbles_stairs", count=16, tilt=0.15, seed=3))
    for kind in ("stairs", "rubbles"):
        if token.startswith(kind):
            rest = token[len(kind):]
            count = int(rest) if rest else (7 if kind == "stairs" else 12)
            tilt = 0.15 if kind == "rubbles" else 0.0
            return generate_scene(SceneSpec(kind=kind, count=count, tilt=tilt, seed=1))
    raise InvalidParams(f"unknown scene shorthand '{token}'")


# ---------------------------------------------------------------------------
# Serialization


def _surface_doc(s: ContactSurface) -> dict:
    rows = np.hstack([s.halfspaces_A, s.halfspaces_b[:, None]])
    return {
        "id": s.id,
        "normal": s.normal.tolist(),
        "offset": s.plane_offset,
        "halfspaces": rows.tolist(),
        "vertices": s.vertices.tolist(),
    }


def save_scene(scene: Scene, start: Pose | None = None, goal: Pose | None = None) -> str:
    doc = {
        "name": scene.name,
        "friction": scene.friction,
        "surfaces": [_surface_doc(s) for s in scene.surfaces],
    }
    if start is not None:
        doc["start"] = {"xy": [start.position[0], start.position[1]], "yaw": start.yaw}
    if goal is not None:
        doc["goal"] = {"xy": [goal.position[0], goal.position[1]], "yaw": goal.yaw}
    return json.dumps(doc, indent=2)


def _parse_json(text: str) -> dict:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from exc


def _require(doc: dict, key: str, where: str):
    if key not in doc:
        raise ParseError(f"missing key '{key}' in {where}")
    return doc[key]


def load_scene(text: str) -> tuple[Scene, Pose | None, Pose | None]:
    doc = _parse_json(text)
    friction = float(_require(doc, "friction", "scene document"))
    surfaces = []
    for i, sd in enumerate(_require(doc, "surfaces", "scene document")):
        rows = np.asarray(_require(sd, "halfspaces", f"surface {i}"), dtype=float)
        if rows.ndim != 2 or rows.shape[1] != 4:
            raise ParseError(f"surface {i}: halfspace rows must have 4 entries")
        verts = sd.get("vertices")
        surfaces.append(ContactSurface(
            id=int(sd.get("id", i)),
            normal=np.asarray(_require(sd, "normal", f"surface {i}"), dtype=float),
            plane_offset=float(_require(sd, "offset", f"surface {i}")),
            halfspaces_A=rows[:, :3],
            halfspaces_b=rows[:, 3],
            vertices=np.asarray(verts, dtype=float) if verts is not None else None,
        ))
    scene = Scene(tuple(surfaces), friction=friction, name=doc.get("name", "scene"))

    def pose_of(key):
        if key not in doc:
            return None
        xy = doc[key]["xy"]
        return Pose(np.array([xy[0], xy[1], 0.0]), float(doc[key].get("yaw", 0.0)))

    return scene, pose_of("start"), pose_of("goal")


def _poly_doc(p: Polytope) -> list:
    return np.hstack([p.A, p.b[:, None]]).tolist()


def _poly_from_doc(rows, where: str) -> Polytope:
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[1] != 4:
        raise ParseError(f"{where}: polytope rows must have 4 entries")
    return Polytope(rows[:, :3], rows[:, 3])


def save_robot(model: RobotModel) -> str:
    doc = {
        "name": model.name,
        "n_feet": model.n_feet,
        "gait": list(model.gait),
        "nominal_root_height": model.nominal_root_height,
        "stance_offsets": model.stance_offsets.tolist(),
        "com_vel_max": model.com_vel_max.tolist(),
        "com_acc_max": model.com_acc_max.tolist(),
        "foot_shape": [_poly_doc(p) for p in model.foot_shape],
        "rom": [_poly_doc(p) for p in model.rom],
        "com_kin": [_poly_doc(p) for p in model.com_kin],
        "rel_foot": [_poly_doc(p) for p in model.rel_foot],
    }
    if model.quad_weights is not None:
        doc["quad_weights"] = [list(w) for w in model.quad_weights]
    return json.dumps(doc, indent=2)


def load_robot(text: str) -> RobotModel:
    doc = _parse_json(text)
    n_feet = int(_require(doc, "n_feet", "robot document"))
    groups = {}
    for key in ("foot_shape", "rom", "com_kin", "rel_foot"):
        blocks = _require(doc, key, "robot document")
        groups[key] = tuple(_poly_from_doc(b, f"{key}[{i}]") for i, b in enumerate(blocks))
    qw = doc.get("quad_weights")
    return RobotModel(
        name=doc.get("name", "robot"),
        n_feet=n_feet,
        gait=tuple(_require(doc, "gait", "robot document")),
        foot_shape=groups["foot_shape"],
        rom=groups["rom"],
        com_kin=groups["com_kin"],
        rel_foot=groups["rel_foot"],
        com_vel_max=np.asarray(_require(doc, "com_vel_max", "robot document"), dtype=float),
        com_acc_max=np.asarray(_require(doc, "com_acc_max", "robot document"), dtype=float),
        nominal_root_height=float(doc.get("nominal_root_height", 0.85)),
        stance_offsets=np.asarray(_require(doc, "stance_offsets", "robot document"), dtype=float),
        quad_weights=tuple(tuple(w) for w in qw) if qw is not None else None,
    )
