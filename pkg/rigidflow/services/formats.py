"""
Format Service - Raster, Pose and Report Files
==============================================
Readers and writers for every file the toolkit exchanges:

    *.png  8-bit RGB / gray images, 8-bit masks (0 / 255),
           16-bit KITTI flow (R = u, G = v, B = valid; stored = flow·64 + 2¹⁵)
    *.pfm  single-channel float32 rasters (depth, disparity)
    *.txt  pose files (12 numbers per line, row-major [R|t]) and calibration
           ("fx fy cx cy width height [baseline]")
    *.json metric / loss / alignment reports

All writers are atomic (temporary file + rename) and PNG compression is
pinned so identical inputs give byte-identical files.
"""
import json
import logging
import os
import re
import tempfile

import cv2
import numpy as np

from ..exceptions import FormatError, InvalidParameterError
from ..models import (FORMAT_VERSION, DepthMap, DisparityMap, FlowField, Image,
                      Intrinsics, Mask, PoseSE3)

logger = logging.getLogger(__name__)

FLOW_SCALE = 64.0
FLOW_OFFSET = 2 ** 15
POSE_FILE_TOLERANCE = 1e-6
DEFAULT_PNG_COMPRESSION = 3


# ===== ATOMIC WRITES =====

def atomic_write_bytes(path, data: bytes):
    """Write ``data`` to a temporary file next to ``path`` and rename it."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, temp_path = tempfile.mkstemp(prefix='.tmp-', dir=directory)
    try:
        with os.fdopen(fd, 'wb') as handle:
            handle.write(data)
        os.replace(temp_path, path)
    except BaseException:
        if os.path.exists(temp_path):
            os.remove(temp_path)
        raise
    logger.debug(f"wrote {path} ({len(data)} bytes)")


def _read_bytes(path):
    with open(path, 'rb') as handle:
        return handle.read()


def _encode_png(array, compression):
    ok, buffer = cv2.imencode('.png', array, [cv2.IMWRITE_PNG_COMPRESSION, int(compression)])
    if not ok:
        raise FormatError("PNG encoding failed")
    return buffer.tobytes()


def _decode_png(path):
    data = np.frombuffer(_read_bytes(path), dtype=np.uint8)
    array = cv2.imdecode(data, cv2.IMREAD_UNCHANGED) if data.size else None
    if array is None:
        raise FormatError("not a readable PNG file", source=os.fspath(path))
    return array


# ===== IMAGES & MASKS =====

def write_image(path, image: Image, compression=DEFAULT_PNG_COMPRESSION):
    """8-bit PNG; 3-channel images are stored as RGB."""
    pixels = np.round(image.channels * 255.0).astype(np.uint8)
    if pixels.shape[2] == 3:
        pixels = cv2.cvtColor(pixels, cv2.COLOR_RGB2BGR)
    elif pixels.shape[2] == 1:
        pixels = pixels[..., 0]
    else:
        raise InvalidParameterError(f"cannot store a {pixels.shape[2]}-channel image as PNG")
    atomic_write_bytes(path, _encode_png(pixels, compression))


def read_image(path) -> Image:
    """8- or 16-bit PNG scaled into [0, 1]; color images come back as RGB."""
    pixels = _decode_png(path)
    if pixels.dtype == np.uint8:
        scale = 255.0
    elif pixels.dtype == np.uint16:
        scale = 65535.0
    else:
        raise FormatError(f"unsupported image depth {pixels.dtype}", source=os.fspath(path))
    if pixels.ndim == 3:
        if pixels.shape[2] == 4:
            pixels = pixels[..., :3]
        pixels = cv2.cvtColor(pixels, cv2.COLOR_BGR2RGB)
    return Image(pixels.astype(np.float64) / scale)


def write_mask(path, mask: Mask, compression=DEFAULT_PNG_COMPRESSION):
    pixels = np.where(mask.values, 255, 0).astype(np.uint8)
    atomic_write_bytes(path, _encode_png(pixels, compression))


def read_mask(path) -> Mask:
    """8-bit PNG; any non-zero value is set."""
    pixels = _decode_png(path)
    if pixels.ndim == 3:
        pixels = pixels.max(axis=2)
    return Mask(pixels > 0)


# ===== FLOW (KITTI 16-bit PNG) =====

def encode_flow(flow: FlowField, validity: Mask = None) -> np.ndarray:
    """H×W×3 uint16 array in (u, v, valid) order."""
    valid = np.ones(flow.shape, dtype=bool) if validity is None else validity.values
    stored = np.clip(np.round(flow.uv * FLOW_SCALE + FLOW_OFFSET), 0, 65535).astype(np.uint16)
    stored = np.where(valid[..., None], stored, 0).astype(np.uint16)
    return np.dstack([stored, valid.astype(np.uint16)])


def decode_flow(stored: np.ndarray):
    valid = stored[..., 2] > 0
    uv = (stored[..., :2].astype(np.float64) - FLOW_OFFSET) / FLOW_SCALE
    uv = np.where(valid[..., None], uv, 0.0)
    return FlowField(uv), Mask(valid)


def write_flow(path, flow: FlowField, validity: Mask = None, compression=DEFAULT_PNG_COMPRESSION):
    rgb = encode_flow(flow, validity)
    atomic_write_bytes(path, _encode_png(rgb[..., ::-1].copy(), compression))


def read_flow(path):
    """
    Returns:
        (FlowField, validity Mask); invalid pixels decode to zero flow.
    """
    stored = _decode_png(path)
    if stored.dtype != np.uint16 or stored.ndim != 3 or stored.shape[2] != 3:
        raise FormatError("flow PNG must be 16-bit with 3 channels", source=os.fspath(path))
    return decode_flow(stored[..., ::-1])


# ===== PFM =====

def write_pfm(path, values):
    """Single-channel little-endian float32 PFM (rows stored bottom-up)."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise InvalidParameterError(f"PFM rasters must be H×W (got {values.shape})")
    height, width = values.shape
    header = f"Pf\n{width} {height}\n-1.0\n".encode('ascii')
    body = np.flipud(values).astype('<f4').tobytes()
    atomic_write_bytes(path, header + body)


def read_pfm(path) -> np.ndarray:
    source = os.fspath(path)
    data = _read_bytes(path)
    lines = data.split(b'\n', 3)
    if len(lines) < 4:
        raise FormatError("truncated PFM header", source=source)
    kind, dims, scale_text, body = lines
    if kind.strip() == b'PF':
        raise FormatError("expected a single-channel PFM (Pf)", source=source)
    if kind.strip() != b'Pf':
        raise FormatError("not a PFM file", source=source)
    match = re.match(r'^\s*(\d+)\s+(\d+)\s*$', dims.decode('ascii', errors='replace'))
    if not match:
        raise FormatError("malformed PFM dimensions", source=source)
    width, height = int(match.group(1)), int(match.group(2))
    try:
        scale = float(scale_text.decode('ascii'))
    except ValueError:
        raise FormatError("malformed PFM scale", source=source)
    dtype = '<f4' if scale < 0 else '>f4'
    if len(body) != 4 * width * height:
        raise FormatError(f"PFM body holds {len(body)} bytes, expected {4 * width * height}", source=source)
    values = np.frombuffer(body, dtype=dtype).reshape(height, width)
    return np.flipud(values).astype(np.float64)


def write_depth(path, depth: DepthMap):
    """Invalid pixels are stored as 0."""
    write_pfm(path, np.where(depth.validity, depth.values, 0.0))


def read_depth(path) -> DepthMap:
    return DepthMap(read_pfm(path))


def write_disparity(path, disparity: DisparityMap):
    write_pfm(path, np.where(disparity.validity, disparity.values, 0.0))


def read_disparity(path) -> DisparityMap:
    return DisparityMap(read_pfm(path))


# ===== POSES =====

def format_pose_line(pose: PoseSE3):
    matrix = np.hstack([pose.rotation, pose.translation[:, None]])
    return ' '.join(repr(float(v)) for v in matrix.reshape(-1))


def write_poses(path, poses):
    text = ''.join(format_pose_line(pose) + '\n' for pose in poses)
    atomic_write_bytes(path, text.encode('ascii'))


def read_poses(path):
    """One PoseSE3 per non-empty line; rotations are snapped onto SO(3)."""
    source = os.fspath(path)
    poses = []
    with open(path, 'r', encoding='ascii', errors='replace') as handle:
        for number, line in enumerate(handle, start=1):
            line = line.split('#', 1)[0].strip()
            if not line:
                continue
            try:
                values = np.array([float(v) for v in line.split()])
            except ValueError:
                raise FormatError(f"line {number}: non-numeric pose entry", source=source)
            if values.size != 12:
                raise FormatError(f"line {number}: expected 12 numbers, found {values.size}", source=source)
            try:
                poses.append(PoseSE3.from_matrix(values.reshape(3, 4), tolerance=POSE_FILE_TOLERANCE))
            except InvalidParameterError as exc:
                raise FormatError(f"line {number}: {exc}", source=source)
    if not poses:
        raise FormatError("pose file is empty", source=source)
    return poses


# ===== CALIBRATION =====

def write_calibration(path, k: Intrinsics, baseline=None):
    values = [k.fx, k.fy, k.cx, k.cy, k.width, k.height]
    if baseline is not None:
        values.append(baseline)
    text = ' '.join(repr(v) if isinstance(v, float) else str(v) for v in values) + '\n'
    atomic_write_bytes(path, text.encode('ascii'))


def read_calibration(path):
    """
    Returns:
        (Intrinsics, baseline or None)
    """
    source = os.fspath(path)
    with open(path, 'r', encoding='ascii', errors='replace') as handle:
        tokens = [token for line in handle for token in line.split('#', 1)[0].split()]
    if len(tokens) not in (6, 7):
        raise FormatError(f"calibration needs 6 or 7 numbers, found {len(tokens)}", source=source)
    try:
        fx, fy, cx, cy = (float(t) for t in tokens[:4])
        width, height = int(float(tokens[4])), int(float(tokens[5]))
        baseline = float(tokens[6]) if len(tokens) == 7 else None
    except ValueError:
        raise FormatError("non-numeric calibration entry", source=source)
    try:
        return Intrinsics(fx, fy, cx, cy, width, height), baseline
    except InvalidParameterError as exc:
        raise FormatError(str(exc), source=source)


# ===== JSON REPORTS =====

def write_json(path, payload: dict):
    """Sorted, indented JSON; ``format_version`` is added when missing."""
    payload = dict(payload)
    payload.setdefault('format_version', FORMAT_VERSION)
    text = json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + '\n'
    atomic_write_bytes(path, text.encode('utf-8'))


def read_json(path) -> dict:
    try:
        with open(path, 'r', encoding='utf-8') as handle:
            return json.load(handle)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg} (line {exc.lineno})", source=os.fspath(path))
