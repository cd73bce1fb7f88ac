"""Ground-truth generators.

`make_planted` builds low-rank plus sparse matrices for recovery checks;
`make_piv_sequence` renders tracer particles advected over a contaminated,
flickering background.

All randomness comes from numpy's PCG64 bit generator, so a seed fully
determines the output. Per-frame noise uses the sub-seed ``(seed, t)``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Tuple

import numpy as np

from .seqio import FrameSequence

RNG_ALGORITHM = "numpy.random.PCG64"

# blobs are rendered out to this many sigmas
_BLOB_RADIUS = 4.0


@dataclass(frozen=True)
class PlantedSpec:
    m: int
    n: int
    rank: int = 1
    sparse_fraction: float = 0.0
    sparse_magnitude: float = 1.0
    seed: int = 0

    def validate(self):
        if self.m < 1 or self.n < 1:
            raise ValueError("m and n must be positive")
        if not 1 <= self.rank <= min(self.m, self.n):
            raise ValueError(f"rank must lie in [1, {min(self.m, self.n)}], got {self.rank}")
        if not 0 <= self.sparse_fraction < 1:
            raise ValueError("sparse_fraction must lie in [0, 1)")
        if not self.sparse_magnitude > 0:
            raise ValueError("sparse_magnitude must be positive")

    @property
    def nnz(self) -> int:
        return int(round(self.sparse_fraction * self.m * self.n))


def make_planted(spec: PlantedSpec):
    """Return ``(d, l0, s0)`` with ``d = l0 + s0``.

    ``l0 = A @ B.T`` where A (m x rank) and B (n x rank) are standard normal
    scaled by ``1/sqrt(m)`` and ``1/sqrt(n)``. ``s0`` has exactly
    ``round(sparse_fraction * m * n)`` entries of ``+-sparse_magnitude`` at
    uniformly chosen positions.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    a = rng.standard_normal((spec.m, spec.rank)) / math.sqrt(spec.m)
    b = rng.standard_normal((spec.n, spec.rank)) / math.sqrt(spec.n)
    l0 = a @ b.T
    s0 = np.zeros(spec.m * spec.n)
    k = spec.nnz
    if k:
        idx = rng.choice(spec.m * spec.n, size=k, replace=False)
        s0[idx] = np.where(rng.random(k) < 0.5, -1.0, 1.0) * spec.sparse_magnitude
    s0 = s0.reshape(spec.m, spec.n)
    return l0 + s0, l0, s0


@dataclass(frozen=True)
class Reflection:
    x: float
    y: float
    sigma: float
    amplitude: float


@dataclass(frozen=True)
class PivSceneSpec:
    """Synthetic PIV scene.

    ``flow`` is ``"uniform"`` (constant ``(u, v)`` px/frame) or ``"vortex"``
    (rigid rotation about ``center`` at ``omega`` rad/frame). The gradient is
    a horizontal ramp from 0 to ``gradient`` across the frame.
    """

    width: int = 64
    height: int = 64
    n_frames: int = 60
    particle_count: int = 80
    particle_sigma: float = 1.0
    particle_peak: float = 0.6
    flow: str = "uniform"
    u: float = 1.0
    v: float = 0.5
    center: Optional[Tuple[float, float]] = None
    omega: float = 0.05
    gradient: float = 0.2
    reflections: Tuple[Reflection, ...] = field(default_factory=tuple)
    modulation: float = 0.0
    period: float = 20.0
    noise_sigma: float = 0.0
    seed: int = 0

    def validate(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("width and height must be positive")
        if self.n_frames < 2:
            raise ValueError("n_frames must be >= 2")
        if self.particle_count < 0:
            raise ValueError("particle_count must be nonnegative")
        if not self.particle_sigma > 0:
            raise ValueError("particle_sigma must be positive")
        if not 0 < self.particle_peak <= 1:
            raise ValueError("particle_peak must lie in (0, 1]")
        if self.flow not in ("uniform", "vortex"):
            raise ValueError(f"unknown flow {self.flow!r}")
        if not 0 <= self.gradient < 1:
            raise ValueError("gradient must lie in [0, 1)")
        if not 0 <= self.modulation < 1:
            raise ValueError("modulation must lie in [0, 1)")
        if not self.period > 0:
            raise ValueError("period must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        for r in self.reflections:
            if not (r.sigma > 0 and r.amplitude >= 0):
                raise ValueError(f"invalid reflection {r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PivSceneSpec":
        data = dict(data)
        data["reflections"] = tuple(Reflection(**r) for r in data.get("reflections", ()))
        if data.get("center") is not None:
            data["center"] = tuple(data["center"])
        return cls(**data)


def _gaussian(dx, dy, sigma):
    return np.exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma))


def _render_particles(xs, ys, spec: PivSceneSpec) -> np.ndarray:
    """Sum of periodic Gaussian blobs, truncated at 4 sigma, clipped to 1."""
    h, w = spec.height, spec.width
    img = np.zeros((h, w))
    r = int(math.ceil(_BLOB_RADIUS * spec.particle_sigma))
    offs = np.arange(-r, r + 1)
    for x, y in zip(xs, ys):
        cx, cy = int(math.floor(x)), int(math.floor(y))
        cols = cx + offs
        rows = cy + offs
        dx = cols - x
        dy = rows - y
        blob = spec.particle_peak * _gaussian(dx[np.newaxis, :], dy[:, np.newaxis],
                                              spec.particle_sigma)
        blob[dy[:, np.newaxis] ** 2 + dx[np.newaxis, :] ** 2
             > (_BLOB_RADIUS * spec.particle_sigma) ** 2] = 0.0
        np.add.at(img, np.ix_(rows % h, cols % w), blob)
    return np.minimum(img, 1.0)


def static_background(spec: PivSceneSpec) -> np.ndarray:
    h, w = spec.height, spec.width
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    ramp = xx / max(w - 1, 1) * spec.gradient
    bg = ramp
    for r in spec.reflections:
        bg = bg + r.amplitude * _gaussian(xx - r.x, yy - r.y, r.sigma)
    return bg


def _advect(xs, ys, spec: PivSceneSpec):
    if spec.flow == "uniform":
        xs, ys = xs + spec.u, ys + spec.v
    else:
        cx, cy = spec.center or ((spec.width - 1) / 2.0, (spec.height - 1) / 2.0)
        c, s = math.cos(spec.omega), math.sin(spec.omega)
        dx, dy = xs - cx, ys - cy
        xs, ys = cx + c * dx - s * dy, cy + s * dx + c * dy
    return np.mod(xs, spec.width), np.mod(ys, spec.height)


def make_piv_sequence(spec: PivSceneSpec):
    """Render ``(frames, truth_background, truth_particles)``.

    The background of frame t is the static background scaled by
    ``1 + modulation * sin(2 pi t / period)``; particles wrap around the
    frame edges. Frames are ``clip(background + particles + noise, 0, 1)``.

    Raises
    ------
    ValueError
        If the scene description is invalid or the modulated background exceeds 1.
    """
    spec.validate()
    base = static_background(spec)
    if base.max() * (1.0 + spec.modulation) > 1.0:
        raise ValueError("background plus modulation exceeds intensity 1")

    rng = np.random.default_rng(spec.seed)
    xs = rng.uniform(0, spec.width, spec.particle_count)
    ys = rng.uniform(0, spec.height, spec.particle_count)

    frames, backgrounds, particles = [], [], []
    for t in range(spec.n_frames):
        gain = 1.0 + spec.modulation * math.sin(2.0 * math.pi * t / spec.period)
        bg = base * gain
        pt = _render_particles(xs, ys, spec)
        frame = bg + pt
        if spec.noise_sigma > 0:
            noise_rng = np.random.default_rng([spec.seed, t])
            frame = frame + noise_rng.normal(0.0, spec.noise_sigma, frame.shape)
        frames.append(np.clip(frame, 0.0, 1.0))
        backgrounds.append(bg)
        particles.append(pt)
        xs, ys = _advect(xs, ys, spec)

    def seq(fs):
        return FrameSequence(frames=fs, source_range=1.0)

    return seq(frames), seq(backgrounds), seq(particles)
