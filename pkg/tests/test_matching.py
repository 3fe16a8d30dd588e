"""Boundary matching: limits, characteristic values, and interface modes."""
import numpy as np
import pytest

from hexamer import green, kernels, matching
from hexamer.errors import DegenerateBoundaryData, EnergyOutsideGap, NoCharacteristicValue


@pytest.fixture(scope="module")
def limits(blended, dirac, vgauge, beta_star):
    return matching.limit_pieces(blended, dirac, vgauge, beta_star)


def test_matching_hermitian(pipeline, dirac):
    for h in (-1.2, 0.0, 0.8):
        mm = pipeline.matrices(dirac.lambda_star + 0.05 * h)
        assert mm.hermiticity_defect < 1e-10


def test_matching_rejects_outside_gap(pipeline, dirac):
    with pytest.raises(EnergyOutsideGap):
        pipeline.matrices(dirac.lambda_star + 0.3)


def test_mpv_kernel(limits):
    m = limits.m_pv
    assert np.abs(m - m.conj().T).max() < 1e-10
    sv = np.linalg.svd(m, compute_uv=False)
    assert (sv < 1e-6).sum() == 4
    assert sv[-5] > 1e-3  # spectral gap to the fifth singular value
    for k in range(4):
        assert np.linalg.norm(m @ limits.kernel_vectors[:, k]) < 1e-6


def test_a_projection_rank(limits):
    sv = np.linalg.svd(limits.a_proj, compute_uv=False)
    assert (sv > 1e-10).sum() == 4
    assert np.abs(limits.a_proj - limits.a_proj.conj().T).max() < 1e-12
    # A is negative semidefinite: x^H A x = -sum |...|^2
    w = np.linalg.eigvalsh(limits.a_proj)
    assert w.max() < 1e-12


def test_xi_eta_profiles(limits, dirac, beta_star):
    assert limits.xi(0.0) == 0.0
    assert abs(limits.eta(0.0) - np.sign(beta_star) / abs(dirac.alpha_star)) < 1e-12
    h = 0.7 * beta_star
    expect = h / (abs(dirac.alpha_star) * np.sqrt(beta_star**2 - h**2))
    assert abs(limits.xi(h) - expect) < 1e-12
    assert limits.xi(-h) == -limits.xi(h)  # odd profile


def test_maux_pv_fixed_point_half(limits):
    """M^aux,pv maps each cone boundary pair to half of itself."""
    for k in range(4):
        x = limits.kernel_vectors[:, k]
        assert np.linalg.norm(limits.maux_pv @ x - 0.5 * x) < 1e-6


def test_maux_limit_combination(limits, dirac, beta_star, vgauge):
    """(M^aux,pv + sgn(beta)/|a*| A2) couples v1 to +i sgn(beta) v3."""
    lim = limits.maux_pv + (np.sign(beta_star) / abs(dirac.alpha_star)) * limits.aaux2
    for k, partner, sgn in ((0, 2, 1.0), (1, 3, -1.0)):
        x = limits.kernel_vectors[:, k]
        y = limits.kernel_vectors[:, partner]
        got = lim @ x
        expect = 0.5 * x + sgn * 1j * np.sign(beta_star) * 0.5 * y
        assert np.linalg.norm(got - expect) < 1e-6


def test_matching_converges_to_limit(blended, hper, dirac, vgauge, beta_star, limits):
    """||M(lam* + delta h, delta) - (Mpv + xi(h) A)|| decreases in delta."""
    hs = np.linspace(-0.9 * beta_star, 0.9 * beta_star, 21) * (1.0 - 1e-6)
    errs = []
    for delta in (0.2, 0.1, 0.05, 0.025):
        iface = kernels.InterfaceKernel.from_bulks(blended, hper, delta)
        pipe = matching.MatchingPipeline(iface)
        row = []
        for h in hs:
            m = pipe.matrices(dirac.lambda_star + delta * h).matrix
            target = limits.m_pv + limits.xi(h) * limits.a_proj
            row.append(np.linalg.norm(m - target, 2))
        errs.append(row)
    errs = np.array(errs)
    for i in range(len(errs) - 1):
        assert np.all(errs[i + 1] <= 1.2 * errs[i])  # 20% slack per halving
    assert np.all(errs[-1] < errs[0])


def test_green_operator_convergence_signs(blended, hper, dirac, vgauge, beta_star):
    """Resolvent limit (5.34): the eta-term enters with +/- per bulk sign."""
    w = vgauge.vectors
    gpv = green.physical_green_pv(
        kernels.BlockedStripOperator(blended), dirac, vgauge, (-1, 0, 1)
    )
    h = 0.5 * beta_star
    xi = h / (abs(dirac.alpha_star) * np.sqrt(beta_star**2 - h**2))
    eta = beta_star / (abs(dirac.alpha_star) * np.sqrt(beta_star**2 - h**2))
    sym = sum(np.outer(w[:, k], w[:, k].conj()) for k in range(4))
    perm = (2, 3, 0, 1)
    skew = sum(
        (1.0 if k % 2 else -1.0) * np.outer(w[:, k], w[:, perm[k]].conj())
        for k in range(4)
    )
    errs = {+1: [], -1: []}
    for delta in (0.1, 0.05, 0.025):
        iface = kernels.InterfaceKernel.from_bulks(blended, hper, delta)
        for sgn, kern in ((+1, iface.right), (-1, iface.left)):
            strip = kernels.BlockedStripOperator(kern)
            g = green.gap_resolvent(strip, dirac.lambda_star + delta * h, (0,))
            target = gpv.blocks[0] + 0.5 * xi * sym + sgn * 0.5 * eta * skew
            errs[sgn].append(np.abs(g.blocks[0] - target).max())
    for sgn in (+1, -1):
        assert errs[sgn][-1] < errs[sgn][0]  # slow O(delta^(1/3)) convergence
        assert errs[sgn][-1] < 0.15
    # the opposite sign does not converge: the eta-term is sign-definite
    strip = kernels.BlockedStripOperator(
        kernels.InterfaceKernel.from_bulks(blended, hper, 0.025).right
    )
    g = green.gap_resolvent(strip, dirac.lambda_star + 0.025 * h, (0,))
    wrong = gpv.blocks[0] + 0.5 * xi * sym - 0.5 * eta * skew
    assert np.abs(g.blocks[0] - wrong).max() > 3.0 * errs[+1][-1]


def test_characteristic_search(modes, beta_star):
    search = modes.characteristic
    assert len(search.values) == 2
    assert search.total_multiplicity() == 4  # two roots, multiplicity two each
    for v in search.values:
        assert v.sigma_min < 1e-10
        assert abs(v.h) < 0.25 * beta_star  # bifurcating from h = 0


def test_characteristic_values_frozen(modes, dirac):
    lams = sorted(v.lam for v in modes.characteristic.values)
    assert abs(lams[0] - 0.04742126608737) < 1e-8
    assert abs(lams[1] - 0.05058086836622) < 1e-8


def test_two_modes_opposite_parity(modes, dirac):
    assert modes.count == 2
    assert sorted(m.parity for m in modes.modes) == [-1, 1]
    for m in modes.modes:
        assert abs(m.lambda_zig - dirac.lambda_star) < 0.01  # near mid-gap
        assert m.residual < 1e-8
        assert 0.0 < m.decay_rate_right < 0.9
        assert 0.0 < m.decay_rate_left < 0.9


def test_modes_match_direct_oracle(modes, oracle):
    assert len(oracle) == 2
    by_parity = {p: v for v, p, _ in oracle}
    for m in modes.modes:
        assert abs(m.lambda_zig - by_parity[m.parity]) < 1e-6


def test_mode_boundary_leading_order(modes, vgauge, beta_star):
    """Boundary data is v1 + i sgn(beta) v3 (even) and v2 - i sgn(beta) v4 (odd)."""
    s = np.sign(beta_star)
    targets = {
        1: (vgauge.vectors[:, 0] + 1j * s * vgauge.vectors[:, 2]) / np.sqrt(2.0),
        -1: (vgauge.vectors[:, 1] - 1j * s * vgauge.vectors[:, 3]) / np.sqrt(2.0),
    }
    for m in modes.modes:
        a = m.boundary_a / np.linalg.norm(m.boundary_a)
        t = targets[m.parity]
        overlap = abs(np.vdot(t, a))
        assert overlap > 0.95  # leading order up to o(1) corrections


def test_mode_profile_boundary_consistency(modes):
    for m in modes.modes:
        i0 = -m.n_lo
        assert np.abs(m.profile[i0] - m.boundary_a).max() < 1e-7
        assert np.abs(m.profile[i0 - 1] - m.boundary_b).max() < 1e-7


def test_mode_tail_decay(modes):
    for m in modes.modes:
        mags = np.linalg.norm(m.profile, axis=1)
        assert mags[0] < 1e-9 * mags.max()
        assert mags[-1] < 1e-9 * mags.max()


def test_o_delta_shrinkage(blended, hper, dirac, beta_star, modes):
    """|lambda_zig - lambda*| / delta decreases when delta is halved."""
    iface_small = kernels.InterfaceKernel.from_bulks(blended, hper, 0.025)
    pipe = matching.MatchingPipeline(iface_small)
    small = matching.count_interface_modes(pipe, dirac.lambda_star, beta_star)
    assert small.count == 2
    h_large = max(abs(m.lambda_zig - dirac.lambda_star) / 0.05 for m in modes.modes)
    h_small = max(abs(m.lambda_zig - dirac.lambda_star) / 0.025 for m in small.modes)
    assert h_small < h_large


def test_control_interface_no_modes(blended, hper, dirac, beta_star, gap):
    iface = kernels.InterfaceKernel.from_bulks(blended, hper, 0.05, inverted=False)
    pipe = matching.MatchingPipeline(iface)
    search = matching.characteristic_search(
        pipe, dirac.lambda_star, beta_star, n_points=81
    )
    assert len(search.values) == 0
    assert search.sigma_min.min() > 1e-4
    with pytest.raises(NoCharacteristicValue):
        matching.characteristic_search(
            pipe, dirac.lambda_star, beta_star, n_points=41, require=True
        )
    assert matching.direct_oracle(iface, dirac.lambda_star, gap) == []


def test_ghost_boundary_data_rejected(pipeline, modes):
    """The non-fixed-point null direction is annihilated up to o(1) by Maux."""
    cv = modes.characteristic.values[0]
    mm = pipeline.matrices(cv.lam)
    basis = cv.null_vectors
    gram = (mm.aux - np.eye(12)) @ basis
    _, sv, vt = np.linalg.svd(gram)
    ghost = basis @ vt[0].conj()
    # for the ghost the fixed-point defect is order one
    assert np.linalg.norm(mm.aux @ ghost - ghost) > 0.5
    scaled = ghost - (mm.aux @ ghost)  # mostly annihilated direction
    with pytest.raises(DegenerateBoundaryData):
        matching.mode_from_boundary(
            pipeline, cv.lam, np.zeros(6, dtype=complex), np.zeros(6, dtype=complex)
        )


def test_mode_decay_consistent_with_resolvent(modes, pipeline):
    """Mode tails decay at the bulk-resolvent rate at the same energy."""
    from hexamer import green

    for m in modes.modes:
        g = green.gap_resolvent(pipeline.right, m.lambda_zig, range(0, 9))
        norms = [np.linalg.norm(g.blocks[d], 2) for d in range(3, 9)]
        res_rate = np.exp(np.polyfit(range(len(norms)), np.log(norms), 1)[0])
        assert abs(m.decay_rate_right - res_rate) < 0.1
