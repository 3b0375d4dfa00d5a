"""Discord tests: zero-discord state construction against determinant
oracles, trace-distance identities, the exact inner weight SDP against a
dense grid oracle, and the two-stage outer search on states whose discord
is known (zeros, the pairing state, the linear interpolation family)."""

import numpy as np
import pytest
from scipy.optimize import minimize

from fermiqc import discord, fock, states
from fermiqc.states import DensityState

I4 = np.eye(4, dtype=complex)


def haar_unitary(rng):
    G = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    return np.linalg.qr(G)[0]


def uniform_offdiag_weights():
    return (np.ones((4, 4)) - np.eye(4)) / 12.0


def random_spec(seed):
    rng = np.random.default_rng(seed)
    lam = rng.random((4, 4))
    return discord.ZeroDiscordSpec(U=haar_unitary(rng), V=haar_unitary(rng),
                                   lam=lam / lam.sum())


def fast_config(**overrides):
    kwargs = dict(restarts=1, seed=0, scout_iters=80, step_budget=200)
    kwargs.update(overrides)
    return discord.DiscordConfig(**kwargs)


# ---------------------------------------------------------------------------
# spec validation
# ---------------------------------------------------------------------------

def test_spec_rejects_nonunitary_basis():
    lam = uniform_offdiag_weights()
    bad = np.eye(4, dtype=complex)
    bad[0, 0] = 2.0
    with pytest.raises(ValueError):
        discord.ZeroDiscordSpec(U=bad, V=I4, lam=lam).validate()


def test_spec_rejects_bad_weights():
    with pytest.raises(ValueError):
        discord.ZeroDiscordSpec(U=I4, V=I4, lam=np.full((4, 4), 0.1)).validate()
    lam = uniform_offdiag_weights()
    lam[0, 1] = -lam[0, 1]
    lam /= lam.sum()
    with pytest.raises(ValueError):
        discord.ZeroDiscordSpec(U=I4, V=I4, lam=lam).validate()


# ---------------------------------------------------------------------------
# zero-discord states
# ---------------------------------------------------------------------------

def test_uniform_identity_mixture_is_maximally_mixed():
    spec = discord.ZeroDiscordSpec(U=I4, V=I4, lam=uniform_offdiag_weights())
    xi = discord.zero_discord_state(spec)
    assert np.abs(xi.op - np.eye(6) / 6.0).max() < 1e-12


def test_single_pair_gives_slater_projector():
    lam = np.zeros((4, 4))
    lam[1, 2] = 1.0
    spec = discord.ZeroDiscordSpec(U=I4, V=I4, lam=lam)
    xi = discord.zero_discord_state(spec)
    coeffs = np.zeros((4, 2), dtype=complex)
    coeffs[1, 0] = 1.0
    coeffs[2, 1] = 1.0
    ref = states.slater_projector(4, coeffs)
    assert np.abs(xi.op - ref.op).max() < 1e-12


def test_pair_states_match_determinant_amplitudes():
    # each kept pair state must be the normalized two-column determinant
    # amplitude vector, up to a global phase
    rng = np.random.default_rng(7)
    U, V = haar_unitary(rng), haar_unitary(rng)
    kept, vecs = discord._pair_states(U, V)
    assert len(kept) == 16
    for (i, j), w in zip(kept, vecs):
        amps = fock.slater_amplitudes(4, np.column_stack([U[:, i], V[:, j]]))
        amps /= np.linalg.norm(amps)
        assert abs(abs(np.vdot(amps, w)) - 1.0) < 1e-12


def test_all_parallel_pairs_raise():
    with pytest.raises(ValueError):
        discord.zero_discord_state(
            discord.ZeroDiscordSpec(U=I4, V=I4, lam=np.eye(4) / 4.0))


def test_single_basis_mixture_diagonal_in_that_basis():
    rng = np.random.default_rng(3)
    U = haar_unitary(rng)
    lam = rng.random((4, 4))
    lam /= lam.sum()
    xi = discord.zero_discord_state(discord.ZeroDiscordSpec(U=U, V=U, lam=lam))
    rotated = states.exterior_power(4, 2, U.conj().T)
    back = rotated @ xi.op @ rotated.conj().T
    off = back - np.diag(np.diagonal(back))
    assert np.abs(off).max() < 1e-10


# ---------------------------------------------------------------------------
# trace distance
# ---------------------------------------------------------------------------

def test_trace_distance_trivials():
    spec = discord.ZeroDiscordSpec(U=I4, V=I4, lam=uniform_offdiag_weights())
    xi = discord.zero_discord_state(spec)
    assert discord.trace_distance(xi, xi) == 0.0

    a = np.zeros((6, 6), dtype=complex)
    b = np.zeros((6, 6), dtype=complex)
    a[0, 0] = 1.0
    b[1, 1] = 1.0
    assert abs(discord.trace_distance(a, b) - 2.0) < 1e-14


def test_trace_distance_hermitian_equals_abs_eigenvalues():
    rng = np.random.default_rng(1)
    for _ in range(5):
        A = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
        B = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
        H1, H2 = A + A.conj().T, B + B.conj().T
        want = np.abs(np.linalg.eigvalsh(H1 - H2)).sum()
        assert abs(discord.trace_distance(H1, H2) - want) < 1e-12


def test_trace_distance_sector_mismatch():
    with pytest.raises(ValueError):
        discord.trace_distance(np.eye(6), np.eye(4))


# ---------------------------------------------------------------------------
# inner weight problem
# ---------------------------------------------------------------------------

def test_simplex_qp_against_slsqp():
    rng = np.random.default_rng(0)
    for _ in range(25):
        K = int(rng.integers(3, 17))
        A = rng.normal(size=(K, K))
        G = A @ A.T + 1e-6 * np.eye(K)
        b = rng.normal(size=K)
        lam = discord._simplex_qp(G, b)
        assert abs(lam.sum() - 1.0) < 1e-9
        assert lam.min() > -1e-12
        ref = minimize(lambda x: x @ G @ x - 2 * b @ x, np.full(K, 1.0 / K),
                       jac=lambda x: 2 * (G @ x - b), method="SLSQP",
                       bounds=[(0, 1)] * K,
                       constraints=[{"type": "eq", "fun": lambda x: x.sum() - 1}],
                       options={"maxiter": 300, "ftol": 1e-14})
        mine = lam @ G @ lam - 2 * b @ lam
        assert mine <= float(ref.fun) + 2e-5


def test_inner_recovers_own_state():
    spec = random_spec(11)
    xi = discord.zero_discord_state(spec)
    lam, dist = discord.inner_min_weights(xi, spec.U, spec.V)
    assert dist <= 1e-6
    assert abs(lam.sum() - 1.0) < 1e-8
    assert lam.min() >= 0.0


def test_inner_pairing_state_grid_oracle():
    """Identity-bases distance of the pairing state against a dense scan.

    The zero-discord states of the identity bases are the occupation-basis
    Slater mixtures.  The state is invariant under mode relabelings that
    fix the two paired masks as one orbit and the four cross masks as
    another, and the objective is convex, so some optimal weight vector is
    constant on those orbits; the scan covers that slice on a 1e-2 mesh.
    """
    rho = states.max_entangled(2)
    idx = fock.basis_index(4, 2)
    i01, i23 = idx[0b0011], idx[0b1100]
    cross = [k for k in range(6) if k not in (i01, i23)]
    best = np.inf
    for s1 in np.arange(0.0, 1.0 + 1e-12, 0.01):
        for s2 in np.arange(0.0, 1.0 - s1 + 1e-12, 0.01):
            mu = np.zeros(6)
            mu[i01], mu[i23] = s1, s2
            mu[cross] = (1.0 - s1 - s2) / 4.0
            val = np.abs(np.linalg.eigvalsh(rho.op - np.diag(mu))).sum()
            best = min(best, val)
    assert abs(best - 1.0) < 1e-12

    lam, dist = discord.inner_min_weights(rho, I4, I4)
    assert abs(dist - best) < 1e-6
    assert abs(lam.sum() - 1.0) < 1e-8


def test_inner_merges_coinciding_pairs():
    # with U = V the ordered pairs (i, j) and (j, i) give one projector;
    # the returned weights must put the mass on the representatives only
    rng = np.random.default_rng(5)
    U = haar_unitary(rng)
    xi = discord.zero_discord_state(
        discord.ZeroDiscordSpec(U=U, V=U, lam=uniform_offdiag_weights()))
    lam, dist = discord.inner_min_weights(xi, U, U)
    assert dist <= 1e-6
    assert abs(np.triu(lam).sum() - 1.0) < 1e-8
    assert np.abs(np.tril(lam, -1)).max() == 0.0


# ---------------------------------------------------------------------------
# outer search
# ---------------------------------------------------------------------------

def test_discord_zero_on_slater():
    coeffs = np.zeros((4, 2), dtype=complex)
    coeffs[0, 0] = 1.0
    coeffs[1, 1] = 1.0
    res = discord.geometric_discord(states.slater_projector(4, coeffs),
                                    fast_config(restarts=0))
    assert res.value <= 1e-4


def test_discord_zero_on_maximally_mixed():
    mix = DensityState(d=4, n=2, op=np.eye(6, dtype=complex) / 6, metadata={})
    res = discord.geometric_discord(mix, fast_config(restarts=0))
    assert res.value <= 1e-4


def test_discord_pairing_state_is_one():
    res = discord.geometric_discord(states.max_entangled(2), fast_config(restarts=0))
    assert abs(res.value - 1.0) <= 1e-3


def test_discord_recovers_random_zero_discord_state():
    rng = np.random.default_rng(3)
    lam = rng.random((4, 4))
    lam /= lam.sum()
    spec = discord.ZeroDiscordSpec(U=haar_unitary(rng), V=haar_unitary(rng),
                                   lam=lam)
    xi = discord.zero_discord_state(spec)
    res = discord.geometric_discord(xi, discord.DiscordConfig(restarts=2, seed=0))
    assert res.value <= 1e-4


def test_discord_dominates_robustness_on_linear_family():
    # the family at parameter p carries effective entangled weight
    # q = p / (6 - 5p); the concurrence (5q - 2) / 3 bounds the robustness
    # from above, and the paired occupation mixture sits at distance q
    for p in (0.5, 0.9):
        q = p / (6 - 5 * p)
        res = discord.geometric_discord(states.family_linear(p), fast_config())
        assert res.value >= max(0.0, (5 * q - 2) / 3) - 0.02
        assert res.value <= q + 1e-3


def test_discord_monotone_in_restarts():
    rng = np.random.default_rng(7)
    A = rng.normal(size=(6, 4)) + 1j * rng.normal(size=(6, 4))
    op = A @ A.conj().T
    mixed = DensityState(d=4, n=2, op=op / np.trace(op).real, metadata={})
    values = [
        discord.geometric_discord(
            mixed, fast_config(restarts=r, seed=5)).value
        for r in (0, 1, 2)
    ]
    assert values[0] >= values[1] - 1e-12
    assert values[1] >= values[2] - 1e-12


def test_discord_invariant_under_basis_rotation():
    rho = states.family_linear(0.7)
    W2 = states.exterior_power(4, 2, haar_unitary(np.random.default_rng(11)))
    rot = DensityState(d=4, n=2, op=W2 @ rho.op @ W2.conj().T, metadata={})
    plain = discord.geometric_discord(rho, fast_config()).value
    r0 = discord.geometric_discord(rot, fast_config(seed=0)).value
    r1 = discord.geometric_discord(rot, fast_config(seed=1)).value
    scatter = max(abs(r0 - r1), 5e-4)
    assert abs(plain - r0) <= 2 * scatter


def test_discord_value_matches_reconstructed_spec():
    res = discord.geometric_discord(states.family_linear(0.6), fast_config())
    res.spec.validate()
    rebuilt = discord.zero_discord_state(res.spec)
    assert abs(res.value - discord.trace_distance(states.family_linear(0.6), rebuilt)) < 1e-10


def test_discord_deterministic_per_seed():
    rho = states.family_linear(0.5)
    a = discord.geometric_discord(rho, fast_config(restarts=0))
    b = discord.geometric_discord(rho, fast_config(restarts=0))
    assert a.value == b.value


def test_discord_single_basis_never_below_two_basis():
    # restricting to V = U shrinks the zero-discord set, so the distance
    # cannot drop
    rho = states.family_linear(0.7)
    two = discord.geometric_discord(rho, fast_config()).value
    one = discord.geometric_discord(rho, fast_config(single_basis=True)).value
    assert one >= two - 2e-3


def test_discord_rejects_wrong_sector():
    with pytest.raises(ValueError):
        discord.geometric_discord(states.max_entangled(3))
