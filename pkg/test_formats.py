"""
Tests for the file readers and writers.
"""
import json

import cv2
import numpy as np
import pytest

from rigidflow.exceptions import FormatError
from rigidflow.models import DepthMap, FlowField, Image, Intrinsics, Mask
from rigidflow.services import formats
from rigidflow.services.geometry import pose_from_6dof


# ===== flow PNG =====

def test_zero_flow_is_stored_at_offset():
    stored = formats.encode_flow(FlowField.zeros(2, 3))
    assert stored.dtype == np.uint16
    np.testing.assert_array_equal(stored[..., :2], 32768)
    np.testing.assert_array_equal(stored[..., 2], 1)


def test_flow_quantization(tmp_path, rng):
    flow = FlowField(rng.uniform(-100.0, 100.0, (5, 6, 2)))
    validity = Mask(rng.uniform(size=(5, 6)) > 0.3)
    path = tmp_path / 'flow.png'
    formats.write_flow(path, flow, validity)
    loaded, loaded_valid = formats.read_flow(path)
    np.testing.assert_array_equal(loaded_valid.values, validity.values)
    valid = validity.values
    assert np.abs(loaded.uv - flow.uv)[valid].max() <= 1.0 / 128 + 1e-12
    np.testing.assert_array_equal(loaded.uv[~valid], 0.0)


def test_flow_png_channel_order(tmp_path):
    uv = np.zeros((1, 1, 2))
    uv[0, 0] = [1.0, -2.0]
    path = tmp_path / 'flow.png'
    formats.write_flow(path, FlowField(uv))
    bgr = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    # R = u, G = v, B = valid
    assert bgr[0, 0, 2] == 32768 + 64
    assert bgr[0, 0, 1] == 32768 - 128
    assert bgr[0, 0, 0] == 1


def test_eight_bit_png_is_not_flow(tmp_path):
    path = tmp_path / 'image.png'
    formats.write_image(path, Image(np.full((2, 2, 3), 0.5)))
    with pytest.raises(FormatError):
        formats.read_flow(path)


# ===== images / masks =====

def test_image_round_trip_within_quantization(tmp_path, rng):
    image = Image(rng.uniform(size=(4, 5, 3)))
    path = tmp_path / 'image.png'
    formats.write_image(path, image)
    assert np.abs(formats.read_image(path).channels - image.channels).max() <= 0.5 / 255 + 1e-12


def test_image_is_stored_as_rgb(tmp_path):
    channels = np.zeros((1, 1, 3))
    channels[0, 0, 0] = 1.0
    path = tmp_path / 'red.png'
    formats.write_image(path, Image(channels))
    assert tuple(cv2.imread(str(path))[0, 0]) == (0, 0, 255)
    np.testing.assert_array_equal(formats.read_image(path).channels[0, 0], [1.0, 0.0, 0.0])


def test_mask_round_trip(tmp_path, rng):
    mask = Mask(rng.uniform(size=(4, 6)) > 0.5)
    path = tmp_path / 'mask.png'
    formats.write_mask(path, mask)
    np.testing.assert_array_equal(formats.read_mask(path).values, mask.values)


def test_garbage_png_is_format_error(tmp_path):
    path = tmp_path / 'broken.png'
    path.write_bytes(b'not a png')
    with pytest.raises(FormatError):
        formats.read_image(path)


def test_writes_are_byte_identical(tmp_path, rng):
    image = Image(rng.uniform(size=(8, 8, 3)))
    formats.write_image(tmp_path / 'a.png', image)
    formats.write_image(tmp_path / 'b.png', image)
    assert (tmp_path / 'a.png').read_bytes() == (tmp_path / 'b.png').read_bytes()


# ===== PFM =====

def test_pfm_stores_float32_bottom_up(tmp_path):
    values = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    path = tmp_path / 'depth.pfm'
    formats.write_pfm(path, values)
    data = path.read_bytes()
    header = b'Pf\n2 3\n-1.0\n'
    assert data[:len(header)] == header
    body = np.frombuffer(data[len(header):], dtype='<f4')
    np.testing.assert_array_equal(body, [5.0, 6.0, 3.0, 4.0, 1.0, 2.0])
    np.testing.assert_array_equal(formats.read_pfm(path), values)


def test_pfm_round_trip_is_exact_for_float32(tmp_path, rng):
    values = rng.uniform(1.0, 80.0, (6, 7)).astype(np.float32).astype(np.float64)
    path = tmp_path / 'depth.pfm'
    formats.write_depth(path, DepthMap(values))
    np.testing.assert_array_equal(formats.read_depth(path).values, values)


def test_big_endian_pfm_is_read(tmp_path):
    path = tmp_path / 'depth.pfm'
    path.write_bytes(b'Pf\n2 1\n1.0\n' + np.array([7.0, 8.0], dtype='>f4').tobytes())
    np.testing.assert_array_equal(formats.read_pfm(path), [[7.0, 8.0]])


@pytest.mark.parametrize('payload', [
    b'PF\n1 1\n-1.0\n' + b'\x00' * 12,
    b'P6\n1 1\n-1.0\n' + b'\x00' * 4,
    b'Pf\n2 2\n-1.0\n' + b'\x00' * 4,
    b'Pf\nx y\n-1.0\n' + b'\x00' * 4,
    b'Pf\n1 1\n',
])
def test_malformed_pfm(tmp_path, payload):
    path = tmp_path / 'bad.pfm'
    path.write_bytes(payload)
    with pytest.raises(FormatError):
        formats.read_pfm(path)


def test_invalid_depth_written_as_zero(tmp_path):
    values = np.full((2, 2), 5.0)
    values[0, 1] = np.nan
    path = tmp_path / 'depth.pfm'
    formats.write_depth(path, DepthMap(values))
    loaded = formats.read_depth(path)
    assert loaded.values[0, 1] == 0.0 and not loaded.validity[0, 1]


# ===== poses / calibration =====

def test_pose_file_is_exact(tmp_path):
    poses = [pose_from_6dof([0.1, -2.0, 30.0, 0.01, 0.2, -0.3]), pose_from_6dof([0.0] * 6)]
    path = tmp_path / 'poses.txt'
    formats.write_poses(path, poses)
    loaded = formats.read_poses(path)
    for expected, actual in zip(poses, loaded):
        np.testing.assert_allclose(actual.matrix, expected.matrix, atol=1e-14)
    assert len(path.read_text().splitlines()) == 2


def test_pose_file_snaps_rounded_rotations(tmp_path):
    rotation = pose_from_6dof([0, 0, 0, 0.3, 0.1, 0.2]).rotation
    line = ' '.join(f"{v:.9f}" for v in np.hstack([rotation, np.ones((3, 1))]).ravel())
    path = tmp_path / 'poses.txt'
    path.write_text(f"# comment\n{line}\n\n")
    (pose,) = formats.read_poses(path)
    assert np.abs(pose.rotation.T @ pose.rotation - np.eye(3)).max() < 1e-12


@pytest.mark.parametrize('text', [
    '',
    '1 0 0 0 0 1 0 0 0 0 1\n',
    '1 0 0 0 0 1 0 0 0 0 1 x\n',
    '2 0 0 0 0 1 0 0 0 0 1 0\n',
])
def test_malformed_pose_files(tmp_path, text):
    path = tmp_path / 'poses.txt'
    path.write_text(text)
    with pytest.raises(FormatError):
        formats.read_poses(path)


def test_calibration_round_trip(tmp_path):
    k = Intrinsics(721.5377, 721.5377, 609.5593, 172.854, 1242, 375)
    path = tmp_path / 'calib.txt'
    formats.write_calibration(path, k, 0.54)
    assert formats.read_calibration(path) == (k, 0.54)
    formats.write_calibration(path, k)
    assert formats.read_calibration(path) == (k, None)


@pytest.mark.parametrize('text', ['1 2 3\n', '1 1 0 0 a 4\n', '0 1 0 0 4 4\n'])
def test_malformed_calibration(tmp_path, text):
    path = tmp_path / 'calib.txt'
    path.write_text(text)
    with pytest.raises(FormatError):
        formats.read_calibration(path)


# ===== JSON =====

def test_json_reports_carry_format_version(tmp_path):
    path = tmp_path / 'report.json'
    formats.write_json(path, {'b': 1.5, 'a': None})
    payload = json.loads(path.read_text())
    assert payload == {'a': None, 'b': 1.5, 'format_version': 1}
    assert path.read_text().index('"a"') < path.read_text().index('"b"')


def test_json_rejects_nan(tmp_path):
    with pytest.raises(ValueError):
        formats.write_json(tmp_path / 'report.json', {'x': float('nan')})


def test_invalid_json_is_format_error(tmp_path):
    path = tmp_path / 'report.json'
    path.write_text('{"a": ')
    with pytest.raises(FormatError):
        formats.read_json(path)
