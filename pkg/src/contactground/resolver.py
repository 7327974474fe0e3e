"""Resolve a confirmed pixel into a 3D contact task.

On confirmation the initial instruction picks the end-effector and task
type, the pixel is lifted to a camera-frame point from the organized point
cloud (with a nearest-present fallback for depth holes), transformed into
the robot frame, and wrapped with a smooth Cartesian trajectory. The result
is serialized to a line-oriented JSON wire format and handed to a file or
TCP sink for the external whole-body controller.
"""
from __future__ import annotations

import enum
import itertools
import json
import math
import socket
import struct
import threading
from dataclasses import dataclass
from typing import Mapping, Protocol

import numpy as np

from .errors import (
    DepthMissingError,
    InvalidTaskError,
    SinkError,
)
from .intent import Utterance
from .llm import ChatRequest, LLMGateway
from .prediction import PixelPoint
from .prompts import EFFECTOR_SELECTOR, SCHEMA_EFFECTOR, system_prompt

__all__ = [
    "PointCloud",
    "CameraExtrinsics",
    "CameraPoint",
    "EndEffector",
    "TaskType",
    "Trajectory",
    "ContactTask",
    "ContactResolver",
    "pixel_to_camera",
    "camera_to_robot",
    "plan_trajectory",
    "emit_contact_task",
    "task_to_wire",
    "task_from_wire",
    "encode_task",
    "validate_task",
    "FileSink",
    "TcpSink",
    "load_point_cloud",
    "dump_point_cloud",
]

WIRE_VERSION = 1
DEFAULT_DEPTH_RADIUS = 10
DEFAULT_DURATION = 4.0
DEFAULT_SAMPLE_RATE = 100.0

_CLOUD_MAGIC = b"PCG1"

Vec3 = tuple[float, float, float]


class EndEffector(enum.Enum):
    LEFT_HAND = "LeftHand"
    RIGHT_HAND = "RightHand"
    LEFT_FOOT = "LeftFoot"
    RIGHT_FOOT = "RightFoot"


class TaskType(enum.Enum):
    SUPPORT_CONTACT = "SupportContact"
    REACH = "Reach"


@dataclass(frozen=True)
class PointCloud:
    """Depth data aligned 1:1 with image pixels; absent cells are holes."""

    points: np.ndarray  # H x W x 3, camera frame, meters
    valid: np.ndarray  # H x W bool

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64)
        valid = np.asarray(self.valid, dtype=bool)
        if points.ndim != 3 or points.shape[2] != 3:
            raise ValueError(f"expected HxWx3 points, got {points.shape}")
        if valid.shape != points.shape[:2]:
            raise ValueError("valid mask shape must match points grid")
        if valid.any() and not np.isfinite(points[valid]).all():
            raise ValueError("present points must be finite")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "valid", valid)

    @property
    def width(self) -> int:
        return self.points.shape[1]

    @property
    def height(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class CameraExtrinsics:
    """Camera pose in the robot frame: p_rob = origin + rotation @ p_cam."""

    origin: np.ndarray  # (3,) meters
    rotation: np.ndarray  # 3x3, orthonormal, det +1

    def __post_init__(self):
        origin = np.asarray(self.origin, dtype=np.float64).reshape(3)
        rotation = np.asarray(self.rotation, dtype=np.float64)
        if rotation.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {rotation.shape}")
        if not np.isfinite(origin).all() or not np.isfinite(rotation).all():
            raise ValueError("extrinsics must be finite")
        if np.abs(rotation.T @ rotation - np.eye(3)).max() > 1e-9:
            raise ValueError("rotation is not orthonormal (tolerance 1e-9)")
        if abs(float(np.linalg.det(rotation)) - 1.0) > 1e-9:
            raise ValueError("rotation must have determinant +1 (tolerance 1e-9)")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "rotation", rotation)

    def inverse(self) -> "CameraExtrinsics":
        rt = self.rotation.T
        return CameraExtrinsics(origin=-(rt @ self.origin), rotation=rt)

    def to_json(self) -> dict:
        return {"origin": self.origin.tolist(), "rotation": self.rotation.tolist()}

    @classmethod
    def from_json(cls, data: Mapping) -> "CameraExtrinsics":
        return cls(origin=np.asarray(data["origin"]), rotation=np.asarray(data["rotation"]))


@dataclass(frozen=True)
class CameraPoint:
    xyz: Vec3
    substituted: bool = False  # True when a depth hole forced a neighbor cell


@dataclass(frozen=True)
class Trajectory:
    duration: float
    samples: tuple[tuple[float, Vec3], ...]

    def __post_init__(self):
        if not (self.duration > 0):
            raise ValueError("duration must be positive")
        if len(self.samples) < 2:
            raise ValueError("trajectory needs at least its two endpoints")
        times = [t for t, _ in self.samples]
        if times[0] != 0.0 or times[-1] != self.duration:
            raise ValueError("samples must span [0, duration]")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("sample times must be strictly increasing")

    @property
    def start(self) -> Vec3:
        return self.samples[0][1]

    @property
    def end(self) -> Vec3:
        return self.samples[-1][1]


@dataclass(frozen=True)
class ContactTask:
    end_effector: EndEffector
    task_type: TaskType
    point_cam: Vec3
    point_rob: Vec3
    trajectory: Trajectory


def pixel_to_camera(
    cloud: PointCloud, p: PixelPoint, radius: int = DEFAULT_DEPTH_RADIUS
) -> CameraPoint:
    """3D camera-frame point for a pixel.

    A hole at the pixel falls back to the nearest present cell within a
    Chebyshev window of `radius`: smallest Euclidean distance wins, ties
    break on row-major cell index. The search expands ring by ring and can
    stop early, but only once no farther ring can still tie the best
    squared distance (a diagonal hit at ring k may tie a straight hit at a
    later ring).
    """
    h, w = cloud.valid.shape
    u, v = p.u, p.v
    if not (0 <= u < w and 0 <= v < h):
        raise ValueError(f"pixel ({u},{v}) outside cloud grid {w}x{h}")
    if cloud.valid[v, u]:
        return CameraPoint(xyz=tuple(float(c) for c in cloud.points[v, u]))

    best_key: tuple[int, int] | None = None
    best_rc: tuple[int, int] | None = None
    for ring in range(1, radius + 1):
        if best_key is not None and ring * ring > best_key[0]:
            break
        rows = range(max(0, v - ring), min(h, v + ring + 1))
        for r in rows:
            if r == v - ring or r == v + ring:
                cols = range(max(0, u - ring), min(w, u + ring + 1))
            else:
                cols = [c for c in (u - ring, u + ring) if 0 <= c < w]
            for c in cols:
                if not cloud.valid[r, c]:
                    continue
                key = ((r - v) ** 2 + (c - u) ** 2, r * w + c)
                if best_key is None or key < best_key:
                    best_key = key
                    best_rc = (r, c)
    if best_rc is None:
        raise DepthMissingError(
            f"no depth within {radius} px of pixel ({u},{v})"
        )
    r, c = best_rc
    return CameraPoint(xyz=tuple(float(x) for x in cloud.points[r, c]), substituted=True)


def camera_to_robot(extrinsics: CameraExtrinsics, p_cam) -> np.ndarray:
    return extrinsics.origin + extrinsics.rotation @ np.asarray(p_cam, dtype=np.float64)


def plan_trajectory(
    start,
    target,
    duration: float = DEFAULT_DURATION,
    sample_rate: float = DEFAULT_SAMPLE_RATE,
) -> Trajectory:
    """Straight-segment Cartesian path with a C2 smooth time profile.

    The profile has zero velocity *and* zero acceleration at both ends, so
    finite-difference velocities at the endpoints vanish even under fine
    sampling. Both endpoints are emitted exactly.
    """
    if not (duration > 0):
        raise ValueError("duration must be positive")
    if not (sample_rate > 0):
        raise ValueError("sample_rate must be positive")
    s = np.asarray(start, dtype=np.float64).reshape(3)
    t = np.asarray(target, dtype=np.float64).reshape(3)
    delta = t - s

    times = [k / sample_rate for k in range(int(math.floor(duration * sample_rate)) + 1)]
    if times[-1] < duration:
        times.append(duration)
    else:
        times[-1] = duration

    samples: list[tuple[float, Vec3]] = []
    last = len(times) - 1
    for i, tk in enumerate(times):
        if i == 0:
            pos = s
        elif i == last:
            pos = t
        else:
            x = tk / duration
            blend = x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
            pos = s + delta * blend
        samples.append((float(tk), (float(pos[0]), float(pos[1]), float(pos[2]))))
    return Trajectory(duration=float(duration), samples=tuple(samples))


class ContactResolver:
    """LLM-backed end-effector choice plus the geometric pipeline."""

    def __init__(
        self,
        gateway: LLMGateway,
        duration: float = DEFAULT_DURATION,
        sample_rate: float = DEFAULT_SAMPLE_RATE,
        depth_radius: int = DEFAULT_DEPTH_RADIUS,
        effector_poses: Mapping[EndEffector, Vec3] | None = None,
        temperature: float = 0.0,
    ):
        self.gateway = gateway
        self.duration = duration
        self.sample_rate = sample_rate
        self.depth_radius = depth_radius
        self.effector_poses = dict(effector_poses or {})
        self.temperature = temperature
        self._selector_system = system_prompt(EFFECTOR_SELECTOR)

    def select_end_effector(self, initial_utterance: Utterance) -> tuple[EndEffector, TaskType]:
        reply = self.gateway.complete_structured(
            ChatRequest(
                system_prompt=self._selector_system,
                user_messages=[("user", initial_utterance.text)],
                schema=SCHEMA_EFFECTOR,
                temperature=self.temperature,
            )
        )
        return EndEffector(reply.parsed.end_effector), TaskType(reply.parsed.task_type)

    def resolve(
        self,
        cloud: PointCloud,
        extrinsics: CameraExtrinsics,
        pixel: PixelPoint,
        initial_utterance: Utterance,
    ) -> ContactTask:
        effector, task_type = self.select_end_effector(initial_utterance)
        cam = pixel_to_camera(cloud, pixel, self.depth_radius)
        rob = camera_to_robot(extrinsics, cam.xyz)
        point_rob = (float(rob[0]), float(rob[1]), float(rob[2]))
        start = self.effector_poses.get(effector, (0.0, 0.0, 0.0))
        trajectory = plan_trajectory(start, point_rob, self.duration, self.sample_rate)
        return ContactTask(
            end_effector=effector,
            task_type=task_type,
            point_cam=cam.xyz,
            point_rob=point_rob,
            trajectory=trajectory,
        )


# --- wire format and sinks ------------------------------------------------


def validate_task(task: ContactTask) -> None:
    end = np.asarray(task.trajectory.end)
    rob = np.asarray(task.point_rob)
    if not np.isfinite(rob).all() or not np.isfinite(np.asarray(task.point_cam)).all():
        raise InvalidTaskError("task points must be finite")
    if float(np.abs(end - rob).max()) > 1e-9:
        raise InvalidTaskError(
            f"trajectory must end at point_rob: ends {tuple(end)} vs {task.point_rob}"
        )


def task_to_wire(task: ContactTask) -> dict:
    return {
        "version": WIRE_VERSION,
        "end_effector": task.end_effector.value,
        "task_type": task.task_type.value,
        "point_cam": list(task.point_cam),
        "point_rob": list(task.point_rob),
        "trajectory": {
            "duration": task.trajectory.duration,
            "samples": [[t, x, y, z] for t, (x, y, z) in task.trajectory.samples],
        },
    }


def task_from_wire(data: Mapping) -> ContactTask:
    try:
        if data["version"] != WIRE_VERSION:
            raise InvalidTaskError(f"unsupported wire version {data['version']!r}")
        trajectory = Trajectory(
            duration=float(data["trajectory"]["duration"]),
            samples=tuple(
                (float(t), (float(x), float(y), float(z)))
                for t, x, y, z in data["trajectory"]["samples"]
            ),
        )
        return ContactTask(
            end_effector=EndEffector(data["end_effector"]),
            task_type=TaskType(data["task_type"]),
            point_cam=tuple(float(c) for c in data["point_cam"]),
            point_rob=tuple(float(c) for c in data["point_rob"]),
            trajectory=trajectory,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidTaskError(f"malformed contact-task message: {exc}") from exc


def encode_task(task: ContactTask) -> bytes:
    """One newline-terminated JSON message per task."""
    return (json.dumps(task_to_wire(task)) + "\n").encode("utf-8")


class TaskSink(Protocol):
    def deliver(self, payload: bytes) -> str:
        """Deliver one encoded task; returns an acknowledgement string."""
        ...


class FileSink:
    """One file per task inside a directory."""

    def __init__(self, directory):
        from pathlib import Path

        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._counter = itertools.count()
        self._lock = threading.Lock()

    def deliver(self, payload: bytes) -> str:
        with self._lock:
            path = self.directory / f"task_{next(self._counter):06d}.json"
            try:
                path.write_bytes(payload)
            except OSError as exc:
                raise SinkError(f"cannot write task file: {exc}") from exc
            return str(path)


class TcpSink:
    """One newline-terminated message per task over a fresh TCP connection."""

    def __init__(self, host: str, port: int, timeout: float = 10.0):
        self.host = host
        self.port = port
        self.timeout = timeout
        self._lock = threading.Lock()

    def deliver(self, payload: bytes) -> str:
        with self._lock:
            try:
                with socket.create_connection((self.host, self.port), timeout=self.timeout) as conn:
                    conn.sendall(payload)
            except OSError as exc:
                raise SinkError(f"cannot reach task sink {self.host}:{self.port}: {exc}") from exc
            return f"{self.host}:{self.port}"


def emit_contact_task(task: ContactTask, sink: TaskSink) -> str:
    """Validate, serialize, and deliver one task; returns the sink's ack."""
    validate_task(task)
    return sink.deliver(encode_task(task))


# --- point cloud file formats ----------------------------------------------


def dump_point_cloud(cloud: PointCloud, binary: bool = True) -> bytes:
    """Serialize a cloud; binary is compact, text is inspectable.

    Binary: b"PCG1" + uint32 width,height (LE) + float32 (x,y,z,valid)
    records in row-major order. Text: "width height" header line then one
    "x y z valid" line per cell. Invalid cells are written as zeros.
    """
    points = np.where(cloud.valid[..., None], cloud.points, 0.0)
    flags = cloud.valid.astype(np.float32)
    if binary:
        grid = np.concatenate([points.astype(np.float32), flags[..., None]], axis=2)
        return _CLOUD_MAGIC + struct.pack("<II", cloud.width, cloud.height) + grid.tobytes()
    lines = [f"{cloud.width} {cloud.height}"]
    for r in range(cloud.height):
        for c in range(cloud.width):
            x, y, z = (float(value) for value in points[r, c])
            lines.append(f"{x!r} {y!r} {z!r} {int(cloud.valid[r, c])}")
    return ("\n".join(lines) + "\n").encode("ascii")


def load_point_cloud(data: bytes) -> PointCloud:
    """Parse either cloud file format (auto-detected by magic bytes)."""
    if data[:4] == _CLOUD_MAGIC:
        if len(data) < 12:
            raise ValueError("truncated binary point cloud")
        w, h = struct.unpack("<II", data[4:12])
        expected = w * h * 4 * 4
        body = data[12:]
        if len(body) != expected:
            raise ValueError(
                f"binary point cloud payload is {len(body)} bytes, expected {expected}"
            )
        grid = np.frombuffer(body, dtype=np.float32).reshape(h, w, 4).astype(np.float64)
        valid = grid[..., 3] > 0.5
        points = np.where(valid[..., None], grid[..., :3], 0.0)
        return PointCloud(points=points, valid=valid)

    text = data.decode("ascii")
    rows = text.split("\n")
    header = rows[0].split()
    if len(header) != 2:
        raise ValueError("text point cloud must start with 'width height'")
    w, h = int(header[0]), int(header[1])
    cells = [line.split() for line in rows[1:] if line.strip()]
    if len(cells) != w * h:
        raise ValueError(f"text point cloud has {len(cells)} records, expected {w * h}")
    points = np.zeros((h, w, 3), dtype=np.float64)
    valid = np.zeros((h, w), dtype=bool)
    for index, parts in enumerate(cells):
        if len(parts) != 4:
            raise ValueError(f"record {index} must be 'x y z valid'")
        r, c = divmod(index, w)
        ok = float(parts[3]) != 0.0
        valid[r, c] = ok
        if ok:
            points[r, c] = [float(parts[0]), float(parts[1]), float(parts[2])]
    return PointCloud(points=points, valid=valid)
