import numpy as np
import pytest

from glvortex.errors import ComputationError, ConfigurationError, WindingError
from glvortex.fields import ComplexField, Grid2D
from glvortex.vortex import (
    VortexObservation,
    VortexTrack,
    boundary_winding,
    _bilinear_zero,
    detect_vortices,
    match_tracks,
    plaquette_winding,
    read_tracks_csv,
    write_tracks_csv,
)


def canonical_vortex(grid, centers, degrees, eps):
    """Product of canonical degree-d factors: ((z-b)/|z-b|)^d * tanh(|z-b|/eps)."""
    X, Y = grid.mesh
    V = np.ones(grid.shape, dtype=np.complex128)
    for (bx, by), d in zip(centers, degrees):
        dz = (X - bx) + 1j * (Y - by)
        r = np.abs(dz)
        unit = np.ones_like(dz)
        np.divide(dz, r, out=unit, where=r > 0)
        V *= unit ** d * np.tanh(r / eps)
    return ComplexField(grid, V.real, V.imag)


def test_plaquette_winding_constant_zero():
    g = Grid2D.square(8)
    V = ComplexField.constant(g, 1.0)
    assert plaquette_winding(V, 3, 4) == 0


def test_plaquette_winding_linear_zero_center():
    g = Grid2D.square(9)
    i, j = 3, 5
    cx = g.xs[i] + g.h / 2
    cy = g.ys[j] + g.h / 2
    V = ComplexField.from_function(g, lambda x, y: (x - cx) + 1j * (y - cy))
    assert plaquette_winding(V, i, j) == 1
    W = ComplexField.from_function(g, lambda x, y: (x - cx) - 1j * (y - cy))
    assert plaquette_winding(W, i, j) == -1


def test_plaquette_winding_zero_corner_raises():
    g = Grid2D.square(8)
    re = np.ones(g.shape)
    im = np.zeros(g.shape)
    re[4, 4] = 0.0
    V = ComplexField(g, re, im)
    with pytest.raises(WindingError):
        plaquette_winding(V, 4, 4)
    with pytest.raises(WindingError):
        plaquette_winding(V, 3, 3)


def test_plaquette_winding_bad_indices():
    g = Grid2D.square(8)
    V = ComplexField.constant(g, 1.0)
    with pytest.raises(ConfigurationError):
        plaquette_winding(V, 7, 0)
    with pytest.raises(ConfigurationError):
        plaquette_winding(V, -1, 0)


def test_detect_constant_field_empty():
    g = Grid2D.square(16)
    out = detect_vortices(ComplexField.constant(g, 1.0, 0.0), t=0.0)
    assert list(out) == []
    assert out.skipped == 0


def test_detect_single_plus_one():
    g = Grid2D.square(64)
    b = (0.52, 0.47)
    V = canonical_vortex(g, [b], [1], eps=0.05)
    out = detect_vortices(V, t=0.25)
    assert len(out) == 1
    obs = out[0]
    assert obs.degree == 1
    assert obs.t == 0.25
    assert np.hypot(obs.position[0] - b[0], obs.position[1] - b[1]) <= g.h
    assert obs.min_modulus < 0.5


def test_detect_pair_with_opposite_degrees():
    g = Grid2D.square(96)
    centers = [(0.3, 0.3), (0.72, 0.68)]
    V = canonical_vortex(g, centers, [1, -1], eps=0.03)
    out = detect_vortices(V, t=0.0)
    assert len(out) == 2
    found = sorted((o.position, o.degree) for o in out)
    assert found[0][1] == 1 and found[1][1] == -1
    for (pos, _), c in zip(found, centers):
        assert np.hypot(pos[0] - c[0], pos[1] - c[1]) <= g.h
    assert boundary_winding(V) == 0
    assert sum(o.degree for o in out) == 0


def test_degree_conservation_random_products():
    g = Grid2D.square(80)
    rng = np.random.default_rng(5)
    for _ in range(5):
        m = rng.integers(1, 5)
        centers = [(rng.uniform(0.25, 0.75), rng.uniform(0.25, 0.75)) for _ in range(m)]
        degrees = [int(d) for d in rng.choice([-2, -1, 1, 2], size=m)]
        V = canonical_vortex(g, centers, degrees, eps=0.04)
        out = detect_vortices(V, t=0.0)
        assert sum(o.degree for o in out) == boundary_winding(V)


def test_detection_invariant_under_global_phase():
    g = Grid2D.square(64)
    V = canonical_vortex(g, [(0.41, 0.63)], [1], eps=0.05)
    alpha = 0.7
    W = ComplexField(
        g,
        np.cos(alpha) * V.re - np.sin(alpha) * V.im,
        np.sin(alpha) * V.re + np.cos(alpha) * V.im,
    )
    a = detect_vortices(V, t=0.0)
    b = detect_vortices(W, t=0.0)
    assert len(a) == len(b) == 1
    assert a[0].degree == b[0].degree
    assert np.hypot(
        a[0].position[0] - b[0].position[0], a[0].position[1] - b[0].position[1]
    ) <= 1e-12


def test_product_winding_is_additive():
    g = Grid2D.square(48)
    V1 = canonical_vortex(g, [(0.35, 0.5)], [1], eps=0.06)
    V2 = canonical_vortex(g, [(0.65, 0.5)], [-1], eps=0.06)
    prod = ComplexField(
        g, V1.re * V2.re - V1.im * V2.im, V1.re * V2.im + V1.im * V2.re
    )
    for i, j in [(5, 5), (16, 23), (30, 23), (40, 12)]:
        w1 = plaquette_winding(V1, i, j)
        w2 = plaquette_winding(V2, i, j)
        assert plaquette_winding(prod, i, j) == w1 + w2


def test_detect_skips_and_counts_zero_corner_plaquettes():
    g = Grid2D.square(16)
    re = np.ones(g.shape)
    im = np.zeros(g.shape)
    re[8, 8] = 0.0
    out = detect_vortices(ComplexField(g, re, im), t=0.0)
    assert list(out) == []
    assert out.skipped == 4  # the four plaquettes sharing the zero node


def test_bilinear_zero_degenerate_returns_none():
    assert _bilinear_zero(np.ones(4), np.zeros(4)) is None


def test_observation_rejects_zero_degree():
    with pytest.raises(ComputationError):
        VortexObservation(t=0.0, position=(0.5, 0.5), degree=0, min_modulus=0.1)


# --- tracking ----------------------------------------------------------------

def obs(t, x, y, d=1):
    return VortexObservation(t=t, position=(x, y), degree=d, min_modulus=0.1)


def test_single_stationary_track():
    tracks: list[VortexTrack] = []
    for k in range(6):
        tracks = match_tracks(tracks, [obs(0.1 * k, 0.5, 0.5)], jump_max=0.2)
    assert len(tracks) == 1
    assert len(tracks[0].observations) == 6
    assert not tracks[0].closed
    assert tracks[0].degree == 1


def test_two_tracks_no_identity_swap():
    tracks: list[VortexTrack] = []
    for k in range(5):
        t = 0.1 * k
        tracks = match_tracks(
            tracks,
            [obs(t, 0.2 + 0.01 * k, 0.3), obs(t, 0.8 - 0.01 * k, 0.7)],
            jump_max=0.05,
        )
    assert len(tracks) == 2
    ends = sorted(tr.last.position[0] for tr in tracks)
    assert ends[0] == pytest.approx(0.24)
    assert ends[1] == pytest.approx(0.76)
    starts = sorted(tr.observations[0].position[0] for tr in tracks)
    assert starts == [0.2, 0.8]
    for tr in tracks:
        xs = [o.position[0] for o in tr.observations]
        assert max(xs) - min(xs) < 0.1  # each track stayed on its own side


def test_annihilation_closes_both_tracks():
    tracks: list[VortexTrack] = []
    tracks = match_tracks(tracks, [obs(0.0, 0.4, 0.5, 1), obs(0.0, 0.6, 0.5, -1)], 0.1)
    tracks = match_tracks(tracks, [obs(0.1, 0.45, 0.5, 1), obs(0.1, 0.55, 0.5, -1)], 0.1)
    tracks = match_tracks(tracks, [], 0.1)
    assert len(tracks) == 2
    assert all(tr.closed for tr in tracks)
    assert all(tr.last.t == 0.1 for tr in tracks)


def test_jump_beyond_limit_opens_new_track():
    tracks = match_tracks([], [obs(0.0, 0.2, 0.2)], 0.05)
    tracks = match_tracks(tracks, [obs(0.1, 0.8, 0.8)], 0.05)
    assert len(tracks) == 2
    assert tracks[0].closed and not tracks[1].closed


def test_degree_mismatch_never_matches():
    tracks = match_tracks([], [obs(0.0, 0.5, 0.5, 1)], 0.5)
    tracks = match_tracks(tracks, [obs(0.1, 0.5, 0.5, -1)], 0.5)
    assert len(tracks) == 2
    assert tracks[0].closed
    assert tracks[1].degree == -1


def test_tracks_csv_roundtrip(tmp_path):
    tracks: list[VortexTrack] = []
    for k in range(3):
        t = 0.05 * k
        tracks = match_tracks(
            tracks, [obs(t, 0.3 + 0.02 * k, 0.4, 1), obs(t, 0.7, 0.6 - 0.02 * k, -1)], 0.1
        )
    path = str(tmp_path / "tracks.csv")
    write_tracks_csv(tracks, path)
    assert open(path).readline().strip() == "track_id,t,x,y,degree,min_modulus"
    back = read_tracks_csv(path)
    assert len(back) == 2
    for a, b in zip(sorted(tracks, key=lambda tr: tr.track_id), back):
        assert a.track_id == b.track_id
        assert np.array_equal(a.times(), b.times())
        assert np.array_equal(a.positions(), b.positions())
        assert a.degree == b.degree
