import math

import numpy as np
import pytest

from blochsim._expm import expm_apply
from blochsim.core import Basis, StateVector, eig_hermitian
from blochsim.errors import ConfigError, TruncationError
from blochsim.models import (
    Disorder,
    DrivenHOSpec,
    LZGridSpec,
    SingleBandSpec,
    build_model,
    coherent_amplitudes,
    displaced_fock_state,
    ho_adiabatic_energy,
    ho_adiabatic_state,
    ho_displacement,
    ho_theta,
    initial_state,
    interior_slice,
    lz_adiabatic_energy,
    lz_transition_probability,
    single_band_eigenstate_oracle,
)
from blochsim.propagate import PropagationPlan, propagate

FIG1 = SingleBandSpec(J=10.0, omega=1.0, n_sites=401)
FIG2 = DrivenHOSpec(omega=1.0, J=0.5, Omega=1.2, n_fock=400)


# --- single band -----------------------------------------------------------

def test_single_band_row():
    model = build_model(FIG1)
    H = model.hamiltonian()
    c = 200  # site 0
    assert H[c, c] == 0.0
    assert H[c, c - 1] == -10.0 and H[c, c + 1] == -10.0


def test_disorder_zero_matches_clean():
    clean = build_model(FIG1).hamiltonian()
    shifted = build_model(SingleBandSpec(
        J=10.0, omega=1.0, n_sites=401,
        disorder=Disorder(std_dev=0.0, seed=5))).hamiltonian()
    assert np.array_equal(clean, shifted)


def test_disorder_reproducible():
    d = Disorder(std_dev=0.3, seed=17)
    assert np.array_equal(d.shifts(100), d.shifts(100))
    assert not np.array_equal(d.shifts(100), Disorder(0.3, 18).shifts(100))


def test_wannier_stark_central_eigenvalues():
    model = build_model(FIG1)
    vals = eig_hermitian(model.hamiltonian_op()).values
    sel = vals[100:301]  # |m| <= 100
    assert np.abs(sel - np.round(sel)).max() < 1e-6


def test_bessel_oracle_limits():
    spec = SingleBandSpec(J=1e-12, omega=1.0, n_sites=5)
    assert single_band_eigenstate_oracle(0, 0, spec) == pytest.approx(1.0)
    # far-off-diagonal amplitudes vanish quickly
    spec2 = SingleBandSpec(J=1.0, omega=1.0, n_sites=41)
    assert abs(single_band_eigenstate_oracle(0, 20, spec2)) < 1e-8


def test_bessel_oracle_vs_eigensolver():
    from scipy import special
    model = build_model(FIG1)
    dec = eig_hermitian(model.hamiltonian_op())
    k = 200  # eigenvalue 0 <-> ladder index m=0
    assert abs(dec.values[k]) < 1e-10
    vec = dec.vectors[:, k].real
    oracle = special.jv(model.sites - 0, 20.0)
    if np.dot(vec, oracle) < 0:
        oracle = -oracle
    assert abs(single_band_eigenstate_oracle(0, 5, FIG1) - special.jv(5, 20.0)) == 0.0
    assert np.abs(vec - oracle)[interior_slice(401)].max() < 1e-6


def test_bessel_oracle_requires_clean():
    spec = SingleBandSpec(J=1.0, omega=1.0, n_sites=5,
                          disorder=Disorder(0.1, 0))
    with pytest.raises(ConfigError):
        single_band_eigenstate_oracle(0, 1, spec)


# --- driven HO -------------------------------------------------------------

def test_driven_ho_matrix():
    model = build_model(FIG2)
    H0 = model.hamiltonian(0.0)
    assert np.array_equal(H0, np.diag(np.arange(400.0)))
    t = math.pi / (2 * 1.2)
    H = model.hamiltonian(t)
    assert H[1, 0] == pytest.approx(0.5 / math.sqrt(2), rel=1e-12)


def test_drive_periodicity_bit_identical():
    model = build_model(FIG2)
    T = 2 * math.pi / 1.2
    # sin(Omega(t+T)) differs from sin(Omega t) only by roundoff of the
    # argument; compare at the exactly representable t = 0 grid instead
    assert np.array_equal(model.hamiltonian(0.25),
                          build_model(FIG2).hamiltonian(0.25))


def test_ho_adiabatic_energy_values():
    assert ho_adiabatic_energy(3, 0.0, FIG2) == pytest.approx(3.0)
    t = math.pi / (2 * 1.2)
    assert ho_adiabatic_energy(3, t, FIG2) == pytest.approx(3.0 - 0.25 / 2)
    # instantaneous spacing is omega for all t
    assert (ho_adiabatic_energy(4, 1.234, FIG2)
            - ho_adiabatic_energy(3, 1.234, FIG2)) == pytest.approx(1.0)


def test_ho_adiabatic_energy_vs_diagonalization():
    spec = DrivenHOSpec(omega=1.0, J=0.5, Omega=1.2, n_fock=120)
    model = build_model(spec)
    t = 0.9
    vals = eig_hermitian(model.hamiltonian_op(t)).values
    oracle = np.array([ho_adiabatic_energy(n, t, spec) for n in range(120)])
    assert np.abs(vals - oracle)[interior_slice(120)].max() < 1e-8


def test_displaced_fock_identity_at_zero():
    psi = displaced_fock_state(3, 0.0, 20)
    expected = np.zeros(20)
    expected[3] = 1.0
    assert np.allclose(psi, expected)


def test_displaced_fock_ground_amplitude():
    beta = 0.4
    psi = displaced_fock_state(0, beta, 40)
    assert abs(psi[0]) == pytest.approx(math.exp(-beta**2 / 2), rel=1e-10)


def test_ho_adiabatic_state_matches_eigenvector():
    spec = DrivenHOSpec(omega=1.0, J=0.5, Omega=1.2, n_fock=80)
    model = build_model(spec)
    t = 1.1
    dec = eig_hermitian(model.hamiltonian_op(t))
    for n in (0, 7, 25):
        st = ho_adiabatic_state(n, t, spec)
        assert abs(np.vdot(st.amplitudes, dec.vectors[:, n])) >= 1 - 1e-8


def test_displacement_truncation_guard():
    with pytest.raises(TruncationError):
        displaced_fock_state(18, 1.5, 20)


def test_ho_theta_closed_form():
    assert ho_theta(2, 5, 0.3, FIG2) == 0.0
    n = 4
    assert ho_theta(n + 1, n, 0.0, FIG2) == pytest.approx(
        0.5 * 1.2 * math.sqrt(n + 1) / (math.sqrt(2) * 1.0))
    t = math.pi / (2 * 1.2)
    assert ho_theta(3, 4, t, FIG2) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ConfigError):
        ho_theta(3, 3, 0.0, FIG2)


# --- LZ grid ---------------------------------------------------------------

def test_lz_uncoupled_degenerate_at_zero():
    model = build_model(LZGridSpec(omega=0.5, lam=1.0, J=1e-15, n_levels=11))
    vals = np.sort(np.linalg.eigvalsh(model.hamiltonian(0.0)))
    # doubly degenerate m*omega
    assert np.allclose(vals[0::2], vals[1::2], atol=1e-12)
    assert np.allclose(np.unique(np.round(vals, 9)),
                       0.5 * np.arange(-5, 6))


def test_lz_diabatic_crossings():
    spec = LZGridSpec(omega=0.5, lam=1.0, J=0.2, n_levels=11)
    model = build_model(spec)
    # at t = tau_per/2 the counter-swept ladders cross: shifted diagonals
    # intersect level-by-level
    t = spec.tau_per / 2
    d = model.diabatic_energies(t)
    n = spec.n_levels
    assert np.allclose(np.sort(d[:n]), np.sort(d[n:] + spec.omega))


def test_lz_adiabatic_energy_closed_form():
    spec = LZGridSpec(omega=0.5, lam=1.0, J=1e-12, n_levels=5)
    assert lz_adiabatic_energy(2, +1, 0.0, spec) == pytest.approx(1.0)
    flat = LZGridSpec(omega=0.5, lam=1.0, J=0.5 / math.pi, n_levels=5)
    ts = np.linspace(-1.3, 2.1, 17)
    for m in (-1, 0, 1):
        plus = [lz_adiabatic_energy(m, +1, t, flat) for t in ts]
        minus = [lz_adiabatic_energy(m, -1, t, flat) for t in ts]
        assert np.ptp(plus) < 1e-12 and np.ptp(minus) < 1e-12
        assert plus[0] - minus[0] == pytest.approx(0.25)


def test_lz_transition_probability_limits():
    assert lz_transition_probability(
        LZGridSpec(omega=1.0, lam=1.0, J=1e-300, n_levels=3)) == 1.0
    assert lz_transition_probability(
        LZGridSpec(omega=1.0, lam=1e6, J=0.5, n_levels=3)) == pytest.approx(1.0, abs=1e-5)


class _TwoLevelLZ:
    """Isolated avoided crossing for the asymptotic formula check."""

    kind = "two_level"
    basis = Basis.DIABATIC_LZ
    dim = 2

    def __init__(self, lam, J):
        self.lam, self.J = lam, J

    def apply_h(self, t, psi):
        return np.array([self.lam * t * psi[0] + self.J * psi[1],
                         self.J * psi[0] - self.lam * t * psi[1]])

    def h_norm_bound(self, t):
        return abs(self.lam * t) + abs(self.J)


def test_lz_probability_vs_two_level_propagation():
    lam, J = 1.0, math.sqrt(0.1)  # J^2/lambda = 0.1
    model = _TwoLevelLZ(lam, J)
    T = 80.0
    psi0 = StateVector(np.array([1.0, 0.0]), Basis.DIABATIC_LZ)
    plan = PropagationPlan(-T, T, 2e-3, [T])
    traj = propagate(model, psi0, plan)
    p_stay = abs(traj.state_at(T).amplitudes[0]) ** 2
    expected = lz_transition_probability(
        LZGridSpec(omega=1.0, lam=lam, J=J, n_levels=3))
    assert p_stay == pytest.approx(expected, rel=0.02)


# --- initial states --------------------------------------------------------

def test_site_delta():
    model = build_model(FIG1)
    psi = initial_state(model, "site_delta", n=0)
    assert psi.amplitudes[200] == 1.0 and psi.norm == 1.0


def test_coherent_mean_occupation():
    model = build_model(FIG2)
    psi = initial_state(model, "coherent", alpha=math.sqrt(200.0))
    mean = (np.arange(400) * psi.populations()).sum()
    assert mean == pytest.approx(200.0, abs=1e-9)


def test_coherent_amplitudes_poisson():
    alpha = 2.0
    amp = coherent_amplitudes(alpha, 60)
    pops = np.abs(amp) ** 2
    n = np.arange(60)
    from scipy import stats
    assert np.abs(pops - stats.poisson.pmf(n, alpha**2)).max() < 1e-12


def test_adiabatic_index_middle():
    spec = LZGridSpec(omega=0.5, lam=1.0, J=0.2, n_levels=21)
    model = build_model(spec)
    psi = initial_state(model, "adiabatic_index", q="middle", t0=-0.125)
    dec = eig_hermitian(model.hamiltonian_op(-0.125))
    assert abs(np.vdot(psi.amplitudes, dec.vectors[:, 21])) == pytest.approx(1.0)


def test_gaussian_sites_width():
    model = build_model(FIG1)
    psi = initial_state(model, "gaussian_sites", center=0.0, sigma=10.0)
    pops = psi.populations()
    sites = model.sites.astype(float)
    var = (sites**2 * pops).sum() - ((sites * pops).sum()) ** 2
    assert math.sqrt(var) == pytest.approx(10.0, rel=1e-6)


def test_initial_state_validation():
    model = build_model(FIG2)
    with pytest.raises(ConfigError):
        initial_state(model, "site_delta", n=0)
    with pytest.raises(TruncationError):
        initial_state(build_model(DrivenHOSpec(omega=1, J=0.5, Omega=1.2,
                                               n_fock=50)),
                      "coherent", alpha=math.sqrt(40.0))


def test_spec_validation():
    with pytest.raises(ConfigError):
        SingleBandSpec(J=1.0, omega=1.0, n_sites=400)  # even
    with pytest.raises(ConfigError):
        LZGridSpec(omega=0.0, lam=1.0, J=0.1, n_levels=5)
    with pytest.raises(ConfigError):
        Disorder(std_dev=-1.0, seed=0)


def test_expm_apply_against_dense():
    from scipy.linalg import expm
    rng = np.random.default_rng(3)
    a = rng.normal(size=(30, 30))
    H = a + a.T
    psi = rng.normal(size=30) + 1j * rng.normal(size=30)
    z = -0.37j
    got = expm_apply(lambda v: H @ v, psi, z, np.abs(H).sum(axis=0).max())
    want = expm(z * H) @ psi
    assert np.abs(got - want).max() < 1e-12 * np.linalg.norm(psi)
