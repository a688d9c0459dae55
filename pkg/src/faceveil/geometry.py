"""Operations on the unit identity hypersphere.

Identity codes live on the unit sphere in R^d, where d matches the
recognizer embedding dimension. Anonymization replaces the original
identity vector with a sampled one whose angle to the original exceeds the
recognizer's verification-threshold angle theta, which makes verification
against the original identity fail by construction.

Identity vectors are plain ``torch.Tensor`` values with the vector
dimension last; every function broadcasts over leading batch dimensions.
All functions are pure, hold no global state, and compute internally in
float64 before casting back to the input dtype, so unit norms hold to 1e-6
even for float32 inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch

from faceveil.errors import (
    AmbiguousPath,
    AnonymityViolation,
    ConfigError,
    DegenerateVector,
    EmptySweep,
)

UNIT_NORM_ATOL = 1e-6
# Tolerance on (1 + cos) below which slerp endpoints count as antipodal;
# keeps the sin(omega) division stable.
ANTIPODAL_ATOL = 1e-6


@dataclass(frozen=True)
class AngleSpec:
    """Angles steering one anonymization: threshold theta, request alpha.

    ``theta`` is the verification-threshold angle of the active recognizer
    (radians); ``alpha`` is the requested angle between the original and
    the anonymous identity vector and must strictly exceed ``theta``.
    ``direction_seed`` picks the tangent direction deterministically.
    """

    theta: float
    alpha: float
    direction_seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.theta < math.pi / 2):
            raise ConfigError(f"theta must lie in (0, pi/2), got {self.theta}")
        if not (self.alpha < math.pi):
            raise ConfigError(f"alpha must lie below pi, got {self.alpha}")
        if not (self.alpha > self.theta):
            raise AnonymityViolation(
                f"alpha ({self.alpha}) must strictly exceed threshold angle theta ({self.theta})"
            )

    @classmethod
    def from_theta(cls, theta: float, direction_seed: int = 0, margin: float = 0.1) -> "AngleSpec":
        """Smallest-margin spec when the caller gives only theta."""
        return cls(theta=theta, alpha=theta + margin, direction_seed=direction_seed)


@dataclass(frozen=True)
class SphericalPath:
    """A sampled geodesic between two unit vectors.

    ``samples`` is an ordered list of (t, point) pairs; every point is
    unit-norm and the angle from ``start`` is non-decreasing in t.
    """

    start: torch.Tensor
    end: torch.Tensor
    samples: list[tuple[float, torch.Tensor]] = field(default_factory=list)


def project_to_sphere(v: torch.Tensor) -> torch.Tensor:
    """Scale ``v`` to unit Euclidean norm along the last dimension.

    Raises DegenerateVector if any vector in the batch has (near-)zero norm.
    """
    v64 = v.double()
    norm = torch.linalg.vector_norm(v64, dim=-1, keepdim=True)
    if torch.any(norm <= 1e-30):
        raise DegenerateVector("cannot project a zero-norm vector onto the sphere")
    return (v64 / norm).to(v.dtype)


def cosine_similarity(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Cosine of the angle between two vectors (dot product for unit inputs)."""
    a64, b64 = a.double(), b.double()
    na = torch.linalg.vector_norm(a64, dim=-1)
    nb = torch.linalg.vector_norm(b64, dim=-1)
    cos = (a64 * b64).sum(dim=-1) / (na * nb)
    return cos.clamp(-1.0, 1.0)


def angle_between(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Angle in radians between two vectors, in [0, pi]."""
    return torch.arccos(cosine_similarity(a, b))


def slerp(a: torch.Tensor, b: torch.Tensor, t: float | torch.Tensor) -> torch.Tensor:
    """Constant-speed interpolation along the great circle from ``a`` to ``b``.

    angle(a, slerp(a, b, t)) == t * angle(a, b); endpoints are reproduced
    exactly at t=0 and t=1. Raises AmbiguousPath for (near-)antipodal
    endpoints, where the geodesic is not unique.
    """
    a64, b64 = a.double(), b.double()
    t64 = torch.as_tensor(t, dtype=torch.float64)
    # scalar t broadcasts as-is; batched t gets a trailing vector axis
    t_col = t64.unsqueeze(-1) if t64.ndim else t64

    cos = (a64 * b64).sum(dim=-1, keepdim=True).clamp(-1.0, 1.0)
    if torch.any(1.0 + cos < ANTIPODAL_ATOL):
        raise AmbiguousPath("antipodal endpoints: infinitely many geodesics")

    # keep arccos' gradient finite for near-identical endpoints; below this
    # angle the renormalized sin-weight formula degrades to lerp, whose
    # direction error is O(omega^3) and far inside every stated tolerance
    omega = torch.arccos(cos.clamp(max=1.0 - 1e-7))
    sin_omega = torch.sin(omega)

    # Nearly parallel endpoints: fall back to the linear limit of the
    # sin-weight formula, then renormalize.
    parallel = sin_omega < 1e-9
    safe_sin = torch.where(parallel, torch.ones_like(sin_omega), sin_omega)
    w_a = torch.where(parallel, (1.0 - t_col) * torch.ones_like(omega), torch.sin((1.0 - t_col) * omega) / safe_sin)
    w_b = torch.where(parallel, t_col * torch.ones_like(omega), torch.sin(t_col * omega) / safe_sin)

    out = w_a * a64 + w_b * b64
    out = out / torch.linalg.vector_norm(out, dim=-1, keepdim=True)
    return out.to(a.dtype)


def _tangent_direction(z_id: torch.Tensor, generator: torch.Generator) -> torch.Tensor:
    """Unit vector orthogonal to ``z_id``, uniformly distributed on the
    tangent sphere; drawn by orthogonalizing a Gaussian sample."""
    z64 = z_id.double()
    for _ in range(8):
        g = torch.randn(z_id.shape, generator=generator, dtype=torch.float64)
        u = g - (g * z64).sum(dim=-1, keepdim=True) * z64
        norm = torch.linalg.vector_norm(u, dim=-1, keepdim=True)
        if torch.all(norm > 1e-12):
            return u / norm
    raise DegenerateVector("could not draw a tangent direction (dimension < 2?)")


def sample_anonymous(
    z_id: torch.Tensor,
    spec: AngleSpec,
    rng: torch.Generator | None = None,
) -> torch.Tensor:
    """Sample an anonymous identity at exactly angle ``spec.alpha`` from ``z_id``.

    The output z_anony is unit-norm with dot(z_id, z_anony) = cos(alpha),
    which is strictly below cos(theta) because alpha > theta: both
    anonymization constraints hold by construction.

    When ``rng`` is omitted, the tangent direction derives deterministically
    from ``spec.direction_seed``; pass a generator instead to draw many
    distinct directions from one advancing stream.
    """
    if not (spec.alpha > spec.theta):  # re-checked: specs may be built unsafely
        raise AnonymityViolation("alpha must strictly exceed theta")
    gen = rng if rng is not None else torch.Generator().manual_seed(spec.direction_seed)
    u = _tangent_direction(z_id, gen)
    out = math.cos(spec.alpha) * z_id.double() + math.sin(spec.alpha) * u
    out = out / torch.linalg.vector_norm(out, dim=-1, keepdim=True)
    return out.to(z_id.dtype)


def sweep_directions(
    z_id: torch.Tensor,
    alphas: list[float],
    seeds: list[int],
) -> torch.Tensor:
    """Grid of identity vectors: row i fixes the tangent direction of
    seeds[i], column j the angle alphas[j].

    Returns a tensor of shape (len(seeds), len(alphas), d). Within a row
    all vectors lie on one geodesic through ``z_id``, so increasing alpha
    moves steadily away from the original identity.
    """
    if len(alphas) == 0 or len(seeds) == 0:
        raise EmptySweep("sweep needs at least one alpha and one seed")
    if any(a2 < a1 for a1, a2 in zip(alphas, alphas[1:])):
        raise ConfigError("alphas must be sorted ascending")
    if z_id.ndim != 1:
        raise ConfigError("sweep_directions expects a single identity vector")

    z64 = z_id.double()
    rows = []
    for seed in seeds:
        gen = torch.Generator().manual_seed(int(seed))
        u = _tangent_direction(z_id, gen)
        row = torch.stack(
            [math.cos(a) * z64 + math.sin(a) * u for a in alphas], dim=0
        )
        row = row / torch.linalg.vector_norm(row, dim=-1, keepdim=True)
        rows.append(row)
    return torch.stack(rows, dim=0).to(z_id.dtype)


def spherical_path(a: torch.Tensor, b: torch.Tensor, ts: list[float]) -> SphericalPath:
    """Materialize slerp samples between ``a`` and ``b`` at the given ts."""
    samples = [(float(t), slerp(a, b, float(t))) for t in ts]
    return SphericalPath(start=a, end=b, samples=samples)


def assert_unit_norm(v: torch.Tensor, atol: float = UNIT_NORM_ATOL, what: str = "vector") -> None:
    """Boundary check used wherever an identity vector enters or leaves."""
    norms = torch.linalg.vector_norm(v.double(), dim=-1)
    err = (norms - 1.0).abs().max().item()
    if err > atol:
        raise DegenerateVector(f"{what} is not unit-norm (max |norm-1| = {err:.3e})")
