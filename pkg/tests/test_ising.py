import math
import warnings

import numpy as np
import pytest

from bpcluster.errors import BPNotConvergedError
from bpcluster.graph import bfs_distances, build_square_lattice
from bpcluster.ising import (
    BETA_C,
    BenchmarkRow,
    CriticalProximityWarning,
    IsingSpec,
    beta_grid,
    benchmark_csv,
    benchmark_sweep,
    bethe_critical_beta,
    bp_critical_beta,
    build_ising_network,
    cylinder_log_z_density,
    fixed_point_energy,
    fixed_point_energy_scan,
    free_energy_density,
    loop_decay_slope,
    loops_csv,
    message_perturbation_response,
    onsager_free_energy_density,
    onsager_log_z_density,
    onsager_log_z_density_2d,
    site_tensor,
    spin_sum_log_z,
    transfer_matrix_log_z,
)
from bpcluster.network import exact_contract


def test_spec_validation():
    with pytest.raises(ValueError):
        IsingSpec(4, -0.1)
    with pytest.raises(ValueError):
        IsingSpec(2, 0.3)
    assert IsingSpec(2, 0.3, periodic=False).n_sites == 4


def test_site_tensor_structure():
    t0 = site_tensor(4, 0.0)
    assert t0[0, 0, 0, 0] == 2 and np.count_nonzero(t0) == 1
    t = site_tensor(4, 0.7)
    for idx in np.ndindex(*t.shape):
        if sum(idx) % 2:
            assert t[idx] == 0
    assert site_tensor(4, 0.3, field=0.2)[1, 0, 0, 0] != 0


@pytest.mark.parametrize("L", [3, 4])
@pytest.mark.parametrize("periodic", [True, False])
@pytest.mark.parametrize("beta", [0.1, 0.3, 0.5])
def test_network_matches_spin_sum(L, periodic, beta):
    spec = IsingSpec(L, beta, periodic=periodic)
    a = exact_contract(build_ising_network(spec)).log_magnitude
    b = spin_sum_log_z(spec)
    assert abs(a - b) <= 1e-10 * abs(b)


def test_transfer_matrix_matches_spin_sum():
    for beta in (0.2, 0.44, 0.7):
        spec = IsingSpec(4, beta)
        assert abs(transfer_matrix_log_z(spec) - spin_sum_log_z(spec)) < 1e-10
    with pytest.raises(ValueError):
        transfer_matrix_log_z(IsingSpec(4, 0.3, periodic=False))


def test_onsager_formula_cross_checks():
    assert onsager_log_z_density(0.0) == math.log(2)
    assert abs(onsager_log_z_density(1e-6) - math.log(2)) < 1e-10
    for beta in (0.2, 0.3, 0.5):
        assert abs(onsager_log_z_density(beta) - onsager_log_z_density_2d(beta)) < 1e-9
    # high-temperature series: log 2 + 2 log cosh b + t^4 + 2 t^6 + O(t^8)
    b = 0.05
    t = math.tanh(b)
    approx = math.log(2) + 2 * math.log(math.cosh(b)) + t**4 + 2 * t**6
    assert abs(onsager_log_z_density(b) - approx) < 1e-9


def test_onsager_against_finite_lattices():
    # away from criticality finite-size corrections are exponentially small
    ref = onsager_log_z_density(0.2)
    assert abs(cylinder_log_z_density(0.2, 14) - ref) < 1e-8
    assert abs(transfer_matrix_log_z(IsingSpec(10, 0.2)) / 100 - ref) < 1e-4
    # below the transition the approach is slower but monotone
    ref = onsager_log_z_density(0.6)
    errs = [abs(cylinder_log_z_density(0.6, w) - ref) for w in (10, 12, 14)]
    assert errs[0] > errs[1] > errs[2] and errs[2] < 3e-6


def test_onsager_proximity_flag():
    with pytest.warns(CriticalProximityWarning):
        onsager_log_z_density(BETA_C)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        onsager_log_z_density(0.3)
    assert abs(BETA_C - 0.44068679350977) < 1e-12
    with pytest.raises(ValueError):
        onsager_free_energy_density(0.0)
    assert abs(onsager_free_energy_density(0.2) + onsager_log_z_density(0.2) / 0.2) < 1e-15


def test_critical_couplings():
    assert bp_critical_beta() == math.log(2) / 2
    assert abs(bp_critical_beta() - 0.34657359) < 1e-8
    assert abs(bethe_critical_beta(4) - bp_critical_beta()) < 1e-15
    assert abs(bethe_critical_beta(3) - 0.5 * math.log(3)) < 1e-15


def test_free_energy_density_at_zero_beta():
    assert free_energy_density(16 * math.log(2), 0.0, 16) == -math.log(2)
    assert free_energy_density(2.0, 0.5, 4) == -1.0


def test_beta_zero_point_is_exact():
    pts = benchmark_sweep([0.0], [4], 6)
    for r in pts[0].rows:
        assert abs(r.df_bp) < 1e-10 and abs(r.df_cluster) < 1e-10 and abs(r.df_loopseries) < 1e-10


def test_benchmark_rows_and_csv(tmp_path):
    pts = benchmark_sweep([0.3, 0.2], [5], 6, cache_dir=tmp_path)
    assert [p.beta for p in pts] == [0.2, 0.3]
    row = pts[0].rows[-1]
    assert row.m == 6 and row.bp_converged
    assert row.df_cluster == row.f_cluster - row.f_exact_ref
    text = benchmark_csv(pts, "h")
    assert text.splitlines()[1] == ",".join(BenchmarkRow.COLUMNS)
    assert text == benchmark_csv(benchmark_sweep([0.2, 0.3], [5], 6, cache_dir=tmp_path), "h")
    assert "mean_abs_Zl" in loops_csv(pts)
    # cluster corrections improve on BP at high temperature
    assert abs(row.df_cluster) < abs(row.df_bp)


def test_cluster_error_decreases_with_weight_l10():
    pt = benchmark_sweep([0.2], [10], 10)[0]
    errs = [abs(r.df_cluster) for r in pt.rows if r.m in (4, 6, 8, 10)]
    assert all(a > b for a, b in zip(errs, errs[1:]))


def test_loop_decay_slope_fit():
    from bpcluster.series import LoopStats

    stats = {w: LoopStats(1, 0, math.exp(-0.5 * w), 0) for w in (4, 6, 8)}
    assert abs(loop_decay_slope(stats) + 0.5) < 1e-12
    with pytest.raises(ValueError):
        loop_decay_slope({4: stats[4]})


def test_beta_grid():
    g = beta_grid(0.25, 0.45, 21)
    assert len(g) == 21 and g[0] == 0.25 and g[-1] == 0.45 and abs(g[10] - 0.35) < 1e-15
    assert beta_grid(0.3, 0.9, 1) == [0.3]


def test_energy_scan_locates_fixed_points():
    thetas = np.linspace(-math.pi / 2, math.pi / 2, 181)
    samples, fixed = fixed_point_energy_scan(0.2, thetas)
    assert len(samples) == 181
    stable = [f for f in fixed if f.stable]
    assert len(stable) == 1 and stable[0].theta == 0.0
    _, fixed = fixed_point_energy_scan(0.5, thetas)
    assert len(fixed) >= 3
    broken = sorted(f.theta for f in fixed if f.stable)
    assert len(broken) == 2 and abs(broken[0] + broken[1]) < 1e-8
    for f in fixed:
        assert f.energy < 1e-8
    assert fixed_point_energy(0.5, 0.3) > 1e-3


def test_perturbation_response_localized():
    L = 8
    zero = message_perturbation_response(IsingSpec(L, 0.2), 0, 0.0)
    assert max(zero.values()) == 0.0
    delta = message_perturbation_response(IsingSpec(L, 0.2), 0, 0.1)
    g, _ = build_square_lattice(L)
    dist = bfs_distances(g, 0)
    by_d = {}
    for e, d in delta.items():
        k = min(dist[a] for a in g.edges[e])
        by_d[k] = max(by_d.get(k, 0.0), d)
    vals = [by_d[k] for k in sorted(by_d)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-2 * vals[0]


def test_perturbation_response_reports_non_convergence():
    from bpcluster.bp import BpSchedule

    with pytest.raises(BPNotConvergedError):
        message_perturbation_response(IsingSpec(4, 0.3), 0, 0.1, BpSchedule(max_iters=2))


def test_loop_contributions_cusp_at_bp_critical_point():
    """Low-weight loop averages peak exactly at beta_BP, falling off faster on the ordered side."""
    from bpcluster.bp import BpSchedule, run_bp
    from bpcluster.enumeration import build_loop_catalog
    from bpcluster.ising import angle_messages, converge_ising_bp
    from bpcluster.network import normalize_by_bp
    from bpcluster.series import _loop_stats, loop_corrections

    L, m = 10, 8
    g, sym = build_square_lattice(L)
    cat = build_loop_catalog(g, m, sym)
    bb = bp_critical_beta()
    thetas = np.linspace(-1.5, 1.5, 601)

    def mean_abs(beta):
        tn = build_ising_network(IsingSpec(L, beta))
        if beta <= bb:
            msgs, rep = converge_ising_bp(tn, beta)
        else:
            _, fixed = fixed_point_energy_scan(beta, thetas)
            th = max(f.theta for f in fixed if f.stable)
            msgs, rep = run_bp(tn, BpSchedule(tol=1e-12, max_iters=50000), messages=angle_messages(tn, th))
        assert rep.converged
        norm, _ = normalize_by_bp(tn, msgs)
        st = _loop_stats(cat, loop_corrections(norm, msgs, cat.loops), m)
        return {w: st[w].mean_abs for w in (4, 6, 8)}

    below, at, above = mean_abs(bb - 0.002), mean_abs(bb), mean_abs(bb + 0.002)
    for w in (4, 6, 8):
        assert at[w] > below[w] and at[w] > above[w]
        # the ordered side drops faster, so a symmetric grid can favour the point below
        assert at[w] - above[w] > at[w] - below[w]
