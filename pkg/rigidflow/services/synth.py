"""
Synthetic Scene Service - Stereo Video with Exact Ground Truth
==============================================================
Renders two rectified stereo pairs (t1, t2) of a scene made of static
textured planes and textured fronto-parallel rectangles that may move
independently. Every pixel is ray cast (nearest hit wins), so depth, optical
flow, rigid flow, occlusion and the moving-object mask are all exact.

Coordinates are camera-1 coordinates at t1. The right camera sits at
``(baseline, 0, 0)``; at t2 the left camera sees ``X2 = T12 · X``. An object
motion is a rotation about the rectangle centre plus a translation, applied
in camera-1 coordinates before the camera motion.
"""
import logging
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np
import tomli_w
from scipy.spatial.transform import Rotation

from ..exceptions import FormatError, InvalidParameterError, SceneError
from ..models import (DepthMap, FlowField, Image, Intrinsics, Mask, ObjectSpec,
                      PlaneSpec, PointCloud, PoseSE3, SceneConfig, SceneSample, StereoRig)
from .formats import (read_calibration, read_depth, read_flow, read_image, read_mask,
                      read_poses, write_calibration, write_depth, write_disparity,
                      write_flow, write_image, write_mask, write_poses, DEFAULT_PNG_COMPRESSION)
from .geometry import (MIN_DEPTH, backproject, compose, depth_to_disparity, pixel_grid,
                       pose_from_6dof, pose_to_6dof, project, relative_poses)

logger = logging.getLogger(__name__)

DEFAULT_BASELINE = 0.54
TEXTURE_COMPONENTS = 5
TEXTURE_AMPLITUDE = 0.45
VISIBILITY_TOLERANCE = 1e-6

SAMPLE_FILES = {
    'l1': 'l1.png', 'r1': 'r1.png', 'l2': 'l2.png', 'r2': 'r2.png',
    'depth1': 'depth1.pfm', 'depth2': 'depth2.pfm', 'depth1_right': 'depth1_right.pfm',
    'disp1': 'disp1.pfm', 'disp1_right': 'disp1_right.pfm',
    'flow12': 'flow12.png', 'flow21': 'flow21.png', 'rigid12': 'rigid12.png',
    'occlusion1': 'occlusion1.png', 'moving1': 'moving1.png',
    'poses': 'poses.txt', 'calib': 'calib.txt',
}


def default_intrinsics(width, height):
    """KITTI-like calibration rescaled to ``width``×``height``."""
    return Intrinsics(0.58 * width, 1.92 * height, width / 2.0, height / 2.0, width, height)


# ===== TEXTURES =====

class ProceduralTexture:
    """
    Sum of seeded 2-D sinusoids per channel, evaluated on surface-local
    coordinates in meters. Values stay inside [0.05, 0.95].
    """

    def __init__(self, seed, frequency=1.0, channels=3):
        rng = np.random.default_rng(seed)
        shape = (channels, TEXTURE_COMPONENTS)
        angles = rng.uniform(0.0, np.pi, shape)
        frequencies = frequency * rng.uniform(0.6, 1.4, shape)
        self.kx = 2.0 * np.pi * frequencies * np.cos(angles)
        self.ky = 2.0 * np.pi * frequencies * np.sin(angles)
        self.phase = rng.uniform(0.0, 2.0 * np.pi, shape)
        amplitude = rng.uniform(0.5, 1.0, shape)
        self.amplitude = TEXTURE_AMPLITUDE * amplitude / amplitude.sum(axis=1, keepdims=True)

    def __call__(self, a, b):
        out = np.full(a.shape + (self.kx.shape[0],), 0.5)
        for c in range(self.kx.shape[0]):
            for j in range(TEXTURE_COMPONENTS):
                out[..., c] += self.amplitude[c, j] * np.sin(
                    self.kx[c, j] * a + self.ky[c, j] * b + self.phase[c, j])
        return out


# ===== SURFACES =====

class _PlaneSurface:
    moving = False
    motion = None

    def __init__(self, spec: PlaneSpec, texture):
        self.normal = spec.normal
        self.offset = spec.offset
        self.texture = texture
        helper = np.array([1.0, 0.0, 0.0]) if abs(self.normal[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        axis_u = helper - (helper @ self.normal) * self.normal
        self.axis_u = axis_u / np.linalg.norm(axis_u)
        self.axis_v = np.cross(self.normal, self.axis_u)

    def at_t2(self):
        return self

    def intersect(self, origin, directions):
        denom = directions @ self.normal
        facing = np.abs(denom) > 1e-12
        depth = (self.offset - origin @ self.normal) / np.where(facing, denom, 1.0)
        hit = facing & (depth > MIN_DEPTH)
        points = origin + np.where(hit, depth, 0.0)[..., None] * directions
        return np.where(hit, depth, np.inf), points @ self.axis_u, points @ self.axis_v


class _RectangleSurface:
    def __init__(self, origin, edge_u, edge_v, texture, motion: PoseSE3, moving):
        self.origin, self.edge_u, self.edge_v = origin, edge_u, edge_v
        self.texture = texture
        self.motion = motion
        self.moving = moving
        self.normal = np.cross(edge_u, edge_v)

    @classmethod
    def from_spec(cls, spec: ObjectSpec, k: Intrinsics, texture):
        origin, edge_u, edge_v = spec.corners(k)
        centre = origin + 0.5 * (edge_u + edge_v)
        # rotation about the centre, then translation, in camera-1 coordinates
        motion = PoseSE3(spec.motion.rotation,
                         centre - spec.motion.rotation @ centre + spec.motion.translation)
        return cls(origin, edge_u, edge_v, texture, motion, spec.is_moving)

    def at_t2(self):
        rotation = self.motion.rotation
        return _RectangleSurface(self.motion.apply(self.origin), rotation @ self.edge_u,
                                 rotation @ self.edge_v, self.texture, self.motion, self.moving)

    def intersect(self, origin, directions):
        denom = directions @ self.normal
        facing = np.abs(denom) > 1e-12
        depth = ((self.origin - origin) @ self.normal) / np.where(facing, denom, 1.0)
        relative = origin + depth[..., None] * directions - self.origin
        s = relative @ self.edge_u / (self.edge_u @ self.edge_u)
        r = relative @ self.edge_v / (self.edge_v @ self.edge_v)
        hit = facing & (depth > MIN_DEPTH) & (s >= 0.0) & (s < 1.0) & (r >= 0.0) & (r < 1.0)
        return (np.where(hit, depth, np.inf),
                s * np.linalg.norm(self.edge_u), r * np.linalg.norm(self.edge_v))


class _RayCast:
    """Nearest-hit result of one camera view."""

    def __init__(self, surfaces, view: PoseSE3, k: Intrinsics, coords=None):
        if coords is None:
            xs, ys = pixel_grid(*k.shape)
        else:
            xs, ys = coords[..., 0], coords[..., 1]
        rays = np.stack([(xs - k.cx) / k.fx, (ys - k.cy) / k.fy, np.ones_like(xs)], axis=-1)
        # camera rays expressed in scene coordinates; ray parameter = camera depth
        origin = -view.rotation.T @ view.translation
        directions = np.einsum('ji,...j->...i', view.rotation, rays)

        self.depth = np.full(xs.shape, np.inf)
        self.index = np.full(xs.shape, -1, dtype=np.int64)
        self.local_a = np.zeros(xs.shape)
        self.local_b = np.zeros(xs.shape)
        for number, surface in enumerate(surfaces):
            depth, a, b = surface.intersect(origin, directions)
            closer = depth < self.depth
            self.depth = np.where(closer, depth, self.depth)
            self.index = np.where(closer, number, self.index)
            self.local_a = np.where(closer, a, self.local_a)
            self.local_b = np.where(closer, b, self.local_b)

    def uncovered(self):
        return int((self.index < 0).sum())

    def shade(self, surfaces):
        image = np.zeros(self.depth.shape + (3,))
        for number, surface in enumerate(surfaces):
            selected = self.index == number
            if selected.any():
                image[selected] = surface.texture(self.local_a[selected], self.local_b[selected])
        return Image(image)


class SceneRenderer:
    """Renders a SceneConfig into a SceneSample."""

    def __init__(self, config: SceneConfig):
        self.config = config
        self.k = config.intrinsics
        frequency = config.texture_frequency
        surfaces = [_PlaneSurface(plane, ProceduralTexture([config.seed, plane.texture_seed, number], frequency))
                    for number, plane in enumerate(config.planes)]
        offset = len(surfaces)
        for number, spec in enumerate(config.objects):
            texture = ProceduralTexture([config.seed, spec.texture_seed, offset + number], frequency)
            surfaces.append(_RectangleSurface.from_spec(spec, self.k, texture))
        self.surfaces_t1 = surfaces
        self.surfaces_t2 = [surface.at_t2() for surface in surfaces]
        shift = PoseSE3(np.eye(3), np.array([-config.baseline, 0.0, 0.0]))
        self.views = {
            'left1': PoseSE3.identity(),
            'right1': shift,
            'left2': config.camera_motion,
            'right2': compose(shift, config.camera_motion),
        }

    def _cast(self, view, surfaces):
        cast = _RayCast(surfaces, self.views[view], self.k)
        missing = cast.uncovered()
        if missing:
            raise SceneError(f"{missing} pixels of view '{view}' see no surface", source=view)
        return cast

    def _flow_from_t1(self, cloud_points, index, moved):
        """Project frame-1 points into frame 2, with or without object motion."""
        points = cloud_points
        if moved:
            points = cloud_points.copy()
            for number, surface in enumerate(self.surfaces_t1):
                selected = index == number
                if surface.motion is not None and selected.any():
                    points[selected] = surface.motion.apply(cloud_points[selected])
        cloud2 = PointCloud(self.config.camera_motion.apply(points))
        coords, valid = project(cloud2, self.k)
        xs, ys = pixel_grid(*self.k.shape)
        flow = np.stack([coords[..., 0] - xs, coords[..., 1] - ys], axis=2)
        return FlowField(np.where(valid[..., None], flow, 0.0)), coords, valid, cloud2.points

    def _reverse_flow(self, cast2: _RayCast):
        depth2 = DepthMap(cast2.depth)
        points2 = backproject(depth2, self.k).points
        scene = self.config.camera_motion.inverse().apply(points2)
        for number, surface in enumerate(self.surfaces_t2):
            selected = cast2.index == number
            if surface.motion is not None and selected.any():
                scene[selected] = surface.motion.inverse().apply(scene[selected])
        coords, valid = project(PointCloud(scene), self.k)
        xs, ys = pixel_grid(*self.k.shape)
        flow = np.stack([coords[..., 0] - xs, coords[..., 1] - ys], axis=2)
        return FlowField(np.where(valid[..., None], flow, 0.0))

    def _visibility(self, coords, valid, points2):
        """Z-buffer check of each frame-1 point against the t2 left view."""
        height, width = self.k.shape
        in_view = (valid & (coords[..., 0] >= -0.5) & (coords[..., 0] < width - 0.5)
                   & (coords[..., 1] >= -0.5) & (coords[..., 1] < height - 0.5))
        recast = _RayCast(self.surfaces_t2, self.views['left2'], self.k, coords=coords)
        depth2 = points2[..., 2]
        return in_view & (recast.depth >= depth2 * (1.0 - VISIBILITY_TOLERANCE))

    def render(self) -> SceneSample:
        left1 = self._cast('left1', self.surfaces_t1)
        right1 = self._cast('right1', self.surfaces_t1)
        left2 = self._cast('left2', self.surfaces_t2)
        right2 = self._cast('right2', self.surfaces_t2)

        depth1 = DepthMap(left1.depth)
        cloud1 = backproject(depth1, self.k).points
        flow12, coords, valid, points2 = self._flow_from_t1(cloud1, left1.index, moved=True)
        rigid12, _, _, _ = self._flow_from_t1(cloud1, left1.index, moved=False)

        moving_ids = [number for number, surface in enumerate(self.surfaces_t1) if surface.moving]
        moving1 = np.isin(left1.index, moving_ids)
        occlusion1 = self._visibility(coords, valid, points2)
        logger.info(f"rendered {self.k.width}x{self.k.height} scene: "
                    f"{int(moving1.sum())} moving, {int((~occlusion1).sum())} occluded pixels")

        return SceneSample(
            l1=left1.shade(self.surfaces_t1),
            r1=right1.shade(self.surfaces_t1),
            l2=left2.shade(self.surfaces_t2),
            r2=right2.shade(self.surfaces_t2),
            depth1=depth1,
            depth2=DepthMap(left2.depth),
            flow12=flow12,
            flow21=self._reverse_flow(left2),
            rigid12=rigid12,
            occlusion1=Mask(occlusion1),
            moving1=Mask(moving1),
            camera_motion=self.config.camera_motion,
            rig=self.config.rig,
            depth1_right=DepthMap(right1.depth),
        )


def render(config: SceneConfig) -> SceneSample:
    """
    Ray cast the scene from all four cameras and derive every ground truth.

    Raises:
        SceneError: some pixel of some view sees no surface
    """
    return SceneRenderer(config).render()


def stereo_disparity_truth(sample: SceneSample, side='left'):
    """``d = B · fx / depth`` for the left (default) or right view at t1."""
    depth = sample.depth1 if side == 'left' else sample.depth1_right
    if depth is None:
        raise InvalidParameterError(f"sample carries no depth for the {side} view")
    return depth_to_disparity(depth, sample.rig)


def perturb_pose(pose: PoseSE3, rot_deg, trans_m, seed=0) -> PoseSE3:
    """
    Left-multiply ``pose`` by a seeded random motion whose rotation angle is
    exactly ``rot_deg`` and whose translation norm is exactly ``trans_m``.
    """
    if not 0 <= rot_deg < 180:
        raise InvalidParameterError(f"rotation perturbation must lie in [0, 180) degrees (got {rot_deg})")
    if trans_m < 0:
        raise InvalidParameterError(f"translation perturbation must be non-negative (got {trans_m})")
    rng = np.random.default_rng(seed)
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    rotation = Rotation.from_rotvec(np.radians(rot_deg) * axis).as_matrix()
    return compose(PoseSE3(rotation, trans_m * direction), pose)


# ===== SCENE CONFIG FILES =====

def _vector(value, size, what):
    values = np.asarray(value, dtype=np.float64).reshape(-1)
    if values.size != size:
        raise SceneError(f"'{what}' needs {size} numbers (got {values.size})", source=what)
    return values


def scene_config_from_dict(data: dict) -> SceneConfig:
    """Build a SceneConfig from the parsed config-file mapping."""
    try:
        camera = data.get('camera', {})
        width = int(camera['width'])
        height = int(camera['height'])
        base = default_intrinsics(width, height)
        k = Intrinsics(float(camera.get('fx', base.fx)), float(camera.get('fy', base.fy)),
                       float(camera.get('cx', base.cx)), float(camera.get('cy', base.cy)), width, height)
        planes = [PlaneSpec(_vector(p['normal'], 3, 'planes.normal'), float(p['offset']),
                            int(p.get('texture_seed', 0)))
                  for p in data.get('planes', [])]
        objects = [ObjectSpec(tuple(int(v) for v in o['footprint']), float(o['depth']),
                              pose_from_6dof(_vector(o.get('motion', [0.0] * 6), 6, 'objects.motion')),
                              int(o.get('texture_seed', 0)))
                   for o in data.get('objects', [])]
        return SceneConfig(
            intrinsics=k,
            baseline=float(data.get('baseline', DEFAULT_BASELINE)),
            camera_motion=pose_from_6dof(_vector(data.get('camera_motion', [0.0] * 6), 6, 'camera_motion')),
            planes=planes,
            objects=objects,
            texture_frequency=float(data.get('texture_frequency', 1.0)),
            seed=int(data.get('seed', 0)),
        )
    except KeyError as exc:
        raise SceneError(f"scene config is missing key {exc}")
    except (InvalidParameterError, TypeError, ValueError) as exc:
        raise SceneError(f"invalid scene config: {exc}")


def scene_config_to_dict(config: SceneConfig) -> dict:
    k = config.intrinsics
    return {
        'seed': int(config.seed),
        'texture_frequency': float(config.texture_frequency),
        'baseline': float(config.baseline),
        'camera_motion': pose_to_6dof(config.camera_motion).tolist(),
        'camera': {'width': int(k.width), 'height': int(k.height), 'fx': float(k.fx), 'fy': float(k.fy),
                   'cx': float(k.cx), 'cy': float(k.cy)},
        'planes': [{'normal': p.normal.tolist(), 'offset': float(p.offset), 'texture_seed': int(p.texture_seed)}
                   for p in config.planes],
        'objects': [{'footprint': [int(v) for v in o.footprint], 'depth': float(o.depth),
                     'motion': pose_to_6dof(o.motion).tolist(), 'texture_seed': int(o.texture_seed)}
                    for o in config.objects],
    }


def dump_scene_config(config: SceneConfig) -> str:
    """TOML text that :func:`load_scene_config` reads back to the same scene."""
    return tomli_w.dumps(scene_config_to_dict(config))


def load_scene_config(path) -> SceneConfig:
    try:
        with open(path, 'rb') as handle:
            data = tomllib.load(handle)
    except tomllib.TOMLDecodeError as exc:
        raise FormatError(f"invalid scene config: {exc}", source=os.fspath(path))
    try:
        return scene_config_from_dict(data)
    except SceneError as exc:
        raise SceneError(str(exc), source=os.fspath(path))


def generate_scene_config(seed, width=128, height=64, n_objects=1, moving=True,
                          baseline=DEFAULT_BASELINE) -> SceneConfig:
    """
    Random but valid street-like layout: a back wall at 15-30 m, a ground
    plane, forward camera motion with at most 2° of rotation, and
    ``n_objects`` rectangles at 5-12 m that move sideways by 1.5-3 m when
    ``moving`` is set.
    """
    rng = np.random.default_rng(seed)
    k = default_intrinsics(width, height)
    wall_depth = rng.uniform(15.0, 30.0)
    planes = [
        PlaneSpec(np.array([0.0, 0.0, 1.0]), wall_depth, texture_seed=1),
        PlaneSpec(np.array([0.0, 1.0, 0.0]), rng.uniform(1.4, 1.8), texture_seed=2),
    ]

    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    rotation = np.radians(rng.uniform(0.0, 2.0)) * axis
    translation = np.array([rng.uniform(-0.1, 0.1), rng.uniform(-0.05, 0.05), -rng.uniform(0.5, 1.5)])
    camera_motion = pose_from_6dof(np.concatenate([translation, rotation]))

    objects = []
    for number in range(n_objects):
        box_w = int(round(width * rng.uniform(0.2, 0.35)))
        box_h = int(round(height * rng.uniform(0.3, 0.5)))
        x0 = int(rng.integers(0, max(1, width - box_w)))
        y0 = int(rng.integers(0, max(1, height - box_h)))
        motion = PoseSE3.identity()
        if moving:
            lateral = rng.choice([-1.0, 1.0]) * rng.uniform(1.5, 3.0)
            motion = pose_from_6dof([lateral, 0.0, rng.uniform(-0.3, 0.3), 0.0, 0.0, 0.0])
        objects.append(ObjectSpec((x0, y0, x0 + box_w, y0 + box_h), rng.uniform(5.0, 12.0),
                                  motion, texture_seed=10 + number))

    # keep the far wall's texture period above ~6 px
    frequency = min(1.0, k.fx / (6.0 * wall_depth))
    return SceneConfig(k, baseline, camera_motion, planes, objects,
                       texture_frequency=frequency, seed=int(seed))


# ===== EXPORT / IMPORT =====

def export(sample: SceneSample, directory, compression=DEFAULT_PNG_COMPRESSION):
    """
    Write every raster, the two-frame trajectory and the calibration of a
    sample into ``directory`` (names in ``SAMPLE_FILES``).

    Returns:
        list of written paths
    """
    os.makedirs(directory, exist_ok=True)
    path = {key: os.path.join(directory, name) for key, name in SAMPLE_FILES.items()}
    for key in ('l1', 'r1', 'l2', 'r2'):
        write_image(path[key], getattr(sample, key), compression)
    write_depth(path['depth1'], sample.depth1)
    write_depth(path['depth2'], sample.depth2)
    write_disparity(path['disp1'], stereo_disparity_truth(sample, 'left'))
    written = [path[key] for key in ('l1', 'r1', 'l2', 'r2', 'depth1', 'depth2', 'disp1')]
    if sample.depth1_right is not None:
        write_depth(path['depth1_right'], sample.depth1_right)
        write_disparity(path['disp1_right'], stereo_disparity_truth(sample, 'right'))
        written += [path['depth1_right'], path['disp1_right']]
    for key in ('flow12', 'flow21', 'rigid12'):
        write_flow(path[key], getattr(sample, key), compression=compression)
    write_mask(path['occlusion1'], sample.occlusion1, compression)
    write_mask(path['moving1'], sample.moving1, compression)
    write_poses(path['poses'], [PoseSE3.identity(), sample.camera_motion.inverse()])
    write_calibration(path['calib'], sample.intrinsics, sample.rig.baseline)
    written += [path[key] for key in ('flow12', 'flow21', 'rigid12', 'occlusion1', 'moving1', 'poses', 'calib')]
    logger.info(f"exported sample to {directory} ({len(written)} files)")
    return written


def load_sample(directory) -> SceneSample:
    """Read back a directory written by :func:`export` (up to format quantization)."""
    path = {key: os.path.join(directory, name) for key, name in SAMPLE_FILES.items()}
    k, baseline = read_calibration(path['calib'])
    if baseline is None:
        raise FormatError("calibration lacks the stereo baseline", source=path['calib'])
    trajectory = read_poses(path['poses'])
    if len(trajectory) < 2:
        raise FormatError("sample trajectory needs two frames", source=path['poses'])
    right_depth = read_depth(path['depth1_right']) if os.path.exists(path['depth1_right']) else None
    return SceneSample(
        l1=read_image(path['l1']),
        r1=read_image(path['r1']),
        l2=read_image(path['l2']),
        r2=read_image(path['r2']),
        depth1=read_depth(path['depth1']),
        depth2=read_depth(path['depth2']),
        flow12=read_flow(path['flow12'])[0],
        flow21=read_flow(path['flow21'])[0],
        rigid12=read_flow(path['rigid12'])[0],
        occlusion1=read_mask(path['occlusion1']),
        moving1=read_mask(path['moving1']),
        camera_motion=relative_poses(trajectory[:2])[0],
        rig=StereoRig(k, baseline),
        depth1_right=right_depth,
    )
