import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from faceveil.errors import (
    AmbiguousPath,
    AnonymityViolation,
    ConfigError,
    DegenerateVector,
    EmptySweep,
)
from faceveil.geometry import (
    AngleSpec,
    angle_between,
    cosine_similarity,
    project_to_sphere,
    sample_anonymous,
    slerp,
    spherical_path,
    sweep_directions,
)


def unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


def random_unit(rng, d):
    return torch.from_numpy(unit(rng.standard_normal(d)))


def rotation_oracle(a, b, t):
    """Independent slerp: Gram-Schmidt basis of span{a, b}, rotate a in-plane
    by t * angle(a, b)."""
    a, b = unit(a), unit(b)
    ang = np.arccos(np.clip(a @ b, -1.0, 1.0))
    u = b - (b @ a) * a
    u = unit(u)
    return np.cos(t * ang) * a + np.sin(t * ang) * u


class TestProjectToSphere:
    def test_scaling_identity(self):
        out = project_to_sphere(torch.tensor([3.0, 4.0]))
        assert torch.allclose(out, torch.tensor([0.6, 0.8]), atol=1e-7)

    def test_idempotent_on_unit_vectors(self):
        rng = np.random.default_rng(0)
        u = random_unit(rng, 17)
        assert torch.allclose(project_to_sphere(u), u, atol=1e-12)

    def test_random_512_dim_norm(self):
        rng = np.random.default_rng(1)
        v = torch.from_numpy(rng.standard_normal((32, 512)) * 10.0)
        out = project_to_sphere(v)
        norms = torch.linalg.vector_norm(out, dim=-1)
        assert torch.all((norms - 1.0).abs() < 1e-6)

    def test_float32_inputs_stay_unit_to_1e6(self):
        rng = np.random.default_rng(2)
        v = torch.from_numpy(rng.standard_normal((64, 512))).float()
        out = project_to_sphere(v)
        norms = torch.linalg.vector_norm(out.double(), dim=-1)
        assert torch.all((norms - 1.0).abs() < 1e-6)

    def test_zero_vector_rejected(self):
        with pytest.raises(DegenerateVector):
            project_to_sphere(torch.zeros(8))

    def test_gradients_flow(self):
        v = torch.tensor([3.0, 4.0], requires_grad=True)
        project_to_sphere(v).sum().backward()
        assert v.grad is not None and torch.isfinite(v.grad).all()


class TestCosineSimilarity:
    def test_self_is_one(self):
        rng = np.random.default_rng(3)
        a = random_unit(rng, 64)
        assert abs(cosine_similarity(a, a).item() - 1.0) < 1e-6

    def test_orthogonal_is_zero(self):
        a = torch.tensor([1.0, 0.0, 0.0])
        b = torch.tensor([0.0, 1.0, 0.0])
        assert abs(cosine_similarity(a, b).item()) < 1e-12

    def test_antipodal_is_minus_one(self):
        rng = np.random.default_rng(4)
        a = random_unit(rng, 64)
        assert abs(cosine_similarity(a, -a).item() + 1.0) < 1e-6

    def test_symmetric_and_equals_dot(self):
        rng = np.random.default_rng(5)
        a, b = random_unit(rng, 32), random_unit(rng, 32)
        cab = cosine_similarity(a, b).item()
        assert abs(cab - cosine_similarity(b, a).item()) < 1e-12
        assert abs(cab - float(a.numpy() @ b.numpy())) < 1e-12


class TestSlerp:
    def test_orthogonal_midpoint(self):
        a = torch.tensor([1.0, 0.0], dtype=torch.float64)
        b = torch.tensor([0.0, 1.0], dtype=torch.float64)
        out = slerp(a, b, 0.5)
        expected = torch.tensor([math.sqrt(2) / 2, math.sqrt(2) / 2], dtype=torch.float64)
        assert torch.allclose(out, expected, atol=1e-12)

    def test_identical_endpoints(self):
        rng = np.random.default_rng(6)
        a = random_unit(rng, 128)
        for t in (0.0, 0.3, 1.0):
            assert torch.allclose(slerp(a, a, t), a, atol=1e-9)

    def test_endpoints_reproduced(self):
        rng = np.random.default_rng(7)
        a, b = random_unit(rng, 64), random_unit(rng, 64)
        assert torch.allclose(slerp(a, b, 0.0), a, atol=1e-9)
        assert torch.allclose(slerp(a, b, 1.0), b, atol=1e-9)

    def test_matches_rotation_oracle_512(self):
        rng = np.random.default_rng(8)
        a, b = random_unit(rng, 512), random_unit(rng, 512)
        out = slerp(a, b, 0.3).numpy()
        want = rotation_oracle(a.numpy(), b.numpy(), 0.3)
        assert np.max(np.abs(out - want)) < 1e-6

    def test_constant_speed(self):
        rng = np.random.default_rng(9)
        a, b = random_unit(rng, 257), random_unit(rng, 257)
        total = angle_between(a, b).item()
        for t in np.linspace(0.0, 1.0, 101):
            got = angle_between(a, slerp(a, b, float(t))).item()
            assert abs(got - t * total) < 1e-5

    def test_antipodal_rejected(self):
        rng = np.random.default_rng(10)
        a = random_unit(rng, 16)
        with pytest.raises(AmbiguousPath):
            slerp(a, -a, 0.5)

    def test_batched_t(self):
        rng = np.random.default_rng(11)
        a, b = random_unit(rng, 33), random_unit(rng, 33)
        ab = torch.stack([a, a]), torch.stack([b, b])
        out = slerp(ab[0], ab[1], torch.tensor([0.25, 0.75]))
        assert torch.allclose(out[0], slerp(a, b, 0.25), atol=1e-12)
        assert torch.allclose(out[1], slerp(a, b, 0.75), atol=1e-12)

    def test_gradients_finite_for_close_endpoints(self):
        a = torch.tensor([1.0, 0.0, 0.0], requires_grad=True)
        b_raw = torch.tensor([1.0, 1e-9, 0.0], requires_grad=True)
        b = b_raw / torch.linalg.vector_norm(b_raw)
        slerp(a, b, 0.5).sum().backward()
        assert torch.isfinite(a.grad).all()
        assert torch.isfinite(b_raw.grad).all()

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6), st.floats(0.0, 1.0))
    def test_property_unit_norm_and_speed(self, seed, t):
        rng = np.random.default_rng(seed)
        a, b = random_unit(rng, 48), random_unit(rng, 48)
        out = slerp(a, b, t)
        assert abs(torch.linalg.vector_norm(out).item() - 1.0) < 1e-6
        total = angle_between(a, b).item()
        assert abs(angle_between(a, out).item() - t * total) < 1e-5


class TestAngleSpec:
    def test_alpha_must_exceed_theta(self):
        with pytest.raises(AnonymityViolation):
            AngleSpec(theta=0.5, alpha=0.5)
        with pytest.raises(AnonymityViolation):
            AngleSpec(theta=0.5, alpha=0.4)

    def test_range_validation(self):
        with pytest.raises(ConfigError):
            AngleSpec(theta=0.0, alpha=0.5)
        with pytest.raises(ConfigError):
            AngleSpec(theta=2.0, alpha=2.5)
        with pytest.raises(ConfigError):
            AngleSpec(theta=0.5, alpha=3.5)

    def test_from_theta_margin(self):
        spec = AngleSpec.from_theta(0.9, direction_seed=7)
        assert spec.alpha == pytest.approx(1.0)
        assert spec.direction_seed == 7


class TestSampleAnonymous:
    def test_verification_threshold_example(self):
        # threshold cosine 0.36, request cosine 0.30
        rng = np.random.default_rng(12)
        z = random_unit(rng, 512)
        spec = AngleSpec(theta=math.acos(0.36), alpha=math.acos(0.30), direction_seed=3)
        out = sample_anonymous(z, spec)
        assert abs(torch.linalg.vector_norm(out).item() - 1.0) < 1e-6
        assert abs(float(out.numpy() @ z.numpy()) - 0.30) < 1e-6

    def test_deterministic_for_seed(self):
        rng = np.random.default_rng(13)
        z = random_unit(rng, 64)
        spec = AngleSpec(theta=0.4, alpha=0.9, direction_seed=99)
        assert torch.equal(sample_anonymous(z, spec), sample_anonymous(z, spec))

    def test_distinct_seeds_distinct_directions(self):
        rng = np.random.default_rng(14)
        z = random_unit(rng, 64)
        a = sample_anonymous(z, AngleSpec(theta=0.4, alpha=0.9, direction_seed=1))
        b = sample_anonymous(z, AngleSpec(theta=0.4, alpha=0.9, direction_seed=2))
        assert angle_between(a, b).item() > 1e-3

    def test_monte_carlo_tangent_statistics(self):
        # 10k draws at alpha=60 deg: unit norm, cos < 0.5, tangent mean ~ 0
        rng = np.random.default_rng(15)
        z = random_unit(rng, 32)
        spec = AngleSpec(theta=0.5, alpha=math.pi / 3, direction_seed=0)
        gen = torch.Generator().manual_seed(1234)
        draws = torch.stack([sample_anonymous(z, spec, rng=gen) for _ in range(10_000)])
        norms = torch.linalg.vector_norm(draws, dim=-1)
        assert torch.all((norms - 1.0).abs() < 1e-6)
        cosines = draws @ z
        assert torch.all(cosines < 0.5 + 1e-9)
        # tangent components: (draw - cos(alpha) z) / sin(alpha), mean -> 0
        tangents = (draws - 0.5 * z) / math.sin(math.pi / 3)
        mean = tangents.mean(dim=0)
        # each tangent coordinate has variance ~ 1/d; 4 sigma bound for the mean
        bound = 4.0 * math.sqrt(1.0 / 32 / 10_000)
        assert torch.all(mean.abs() < bound)

    def test_alpha_at_theta_rejected(self):
        rng = np.random.default_rng(16)
        z = random_unit(rng, 16)
        # the constructor blocks alpha <= theta; the sampler re-checks specs
        # built around it
        spec = AngleSpec(theta=0.4, alpha=0.9)
        object.__setattr__(spec, "alpha", 0.4)
        with pytest.raises(AnonymityViolation):
            sample_anonymous(z, spec)

    def test_strictly_below_threshold_cosine(self):
        rng = np.random.default_rng(17)
        z = random_unit(rng, 64)
        spec = AngleSpec(theta=0.4, alpha=0.4 + 1e-6, direction_seed=5)
        out = sample_anonymous(z, spec)
        assert float(out.numpy() @ z.numpy()) < math.cos(0.4)


class TestSweepDirections:
    def test_single_zero_alpha_is_identity(self):
        rng = np.random.default_rng(18)
        z = random_unit(rng, 64)
        grid = sweep_directions(z, [0.0], [7])
        assert grid.shape == (1, 1, 64)
        assert torch.allclose(grid[0, 0], z, atol=1e-9)

    def test_grid_angles_match_alphas(self):
        rng = np.random.default_rng(19)
        z = random_unit(rng, 96)
        alphas = [0.2, 0.5, 0.8, 1.1, 1.4]
        grid = sweep_directions(z, alphas, [1, 2, 3])
        assert grid.shape == (3, 5, 96)
        for i in range(3):
            angles = [angle_between(z, grid[i, j]).item() for j in range(5)]
            for got, want in zip(angles, alphas):
                assert abs(got - want) < 1e-6
            assert all(a2 > a1 for a1, a2 in zip(angles, angles[1:]))

    def test_rows_are_coplanar_with_z(self):
        # fixed seed, varying alpha: all points on one geodesic through z
        rng = np.random.default_rng(20)
        z = random_unit(rng, 64)
        grid = sweep_directions(z, [0.3, 0.7, 1.2], [42])[0]
        u = grid[0] - cosine_similarity(grid[0], z) * z
        u = u / torch.linalg.vector_norm(u)
        for j in range(3):
            p = grid[j]
            residual = p - (p @ z) * z - (p @ u) * u
            assert torch.linalg.vector_norm(residual).item() < 1e-6

    def test_same_alpha_different_seeds(self):
        rng = np.random.default_rng(21)
        z = random_unit(rng, 64)
        grid = sweep_directions(z, [0.9], [1, 2])
        a1 = angle_between(z, grid[0, 0]).item()
        a2 = angle_between(z, grid[1, 0]).item()
        assert abs(a1 - a2) < 1e-9
        assert angle_between(grid[0, 0], grid[1, 0]).item() > 1e-3

    def test_empty_rejected(self):
        z = torch.tensor([1.0, 0.0])
        with pytest.raises(EmptySweep):
            sweep_directions(z, [], [1])
        with pytest.raises(EmptySweep):
            sweep_directions(z, [0.5], [])

    def test_unsorted_alphas_rejected(self):
        z = torch.tensor([1.0, 0.0, 0.0])
        with pytest.raises(ConfigError):
            sweep_directions(z, [0.5, 0.2], [1])


class TestSphericalPath:
    def test_samples_unit_norm_and_monotone(self):
        rng = np.random.default_rng(22)
        a, b = random_unit(rng, 40), random_unit(rng, 40)
        path = spherical_path(a, b, [0.0, 0.25, 0.5, 0.75, 1.0])
        angles = [angle_between(a, p).item() for _, p in path.samples]
        assert all(a2 >= a1 - 1e-12 for a1, a2 in zip(angles, angles[1:]))
        for _, p in path.samples:
            assert abs(torch.linalg.vector_norm(p).item() - 1.0) < 1e-6
