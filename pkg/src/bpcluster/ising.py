"""Two-dimensional Ising model: tensor network, exact references, benchmarks."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .graph import build_square_lattice
from .network import TensorNetwork
from .tensor import LabeledTensor

BETA_C = 0.5 * math.log(1.0 + math.sqrt(2.0))


@dataclass(frozen=True)
class IsingSpec:
    L: int
    beta: float
    J: float = 1.0
    periodic: bool = True

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if self.periodic and self.L < 3:
            raise ValueError("periodic lattices need L >= 3")
        if not self.periodic and self.L < 2:
            raise ValueError("open lattices need L >= 2")

    @property
    def n_sites(self) -> int:
        return self.L * self.L


def bond_weights(beta: float, J: float = 1.0) -> np.ndarray:
    """``w[s_index, x]`` with ``sum_x w(s,x) w(s',x) = exp(beta J s s')``.

    Row 0 is spin +1, row 1 spin -1.
    """
    k = beta * J
    c = np.sqrt(complex(math.cosh(k)))
    t = np.sqrt(complex(math.tanh(k)))
    return np.array([[c, c * t], [c, -c * t]], dtype=np.complex128)


def site_tensor(degree: int, beta: float, J: float = 1.0, field: float = 0.0) -> np.ndarray:
    """``T[x1..xd] = sum_s exp(field*s) prod_i w(s, x_i)``."""
    w = bond_weights(beta, J)
    out = np.zeros((2,) * degree, dtype=np.complex128)
    for si, s in enumerate((1, -1)):
        term = np.asarray(math.exp(field * s), dtype=np.complex128)
        for _ in range(degree):
            term = np.multiply.outer(term, w[si])
        out += term
    return out


def build_ising_network(spec: IsingSpec, fields: dict[int, float] | None = None) -> TensorNetwork:
    """Bond dimension 2 network whose contraction is the Ising partition function.

    ``fields`` optionally adds a local z-field ``exp(h s)`` at chosen sites.
    Open boundaries use lower-rank tensors with the missing legs dropped.
    """
    g, _ = build_square_lattice(spec.L, spec.periodic)
    fields = fields or {}
    tensors = {}
    for v in range(g.n_vertices):
        data = site_tensor(g.degree(v), spec.beta, spec.J, fields.get(v, 0.0))
        tensors[v] = LabeledTensor(g.incident[v], data)
    return TensorNetwork(g, tensors)


def ising_lattice(spec: IsingSpec):
    return build_square_lattice(spec.L, spec.periodic)


# -- exact references --------------------------------------------------------


def spin_sum_log_z(spec: IsingSpec, chunk: int = 1 << 16) -> float:
    """``log Z`` by direct summation over all ``2^(L^2)`` spin configurations."""
    g, _ = build_square_lattice(spec.L, spec.periodic)
    n = g.n_vertices
    if n > 24:
        raise ValueError(f"{n} spins is too many for a direct spin sum")
    us = np.array([u for u, _ in g.edges])
    vs = np.array([v for _, v in g.edges])
    k = spec.beta * spec.J
    parts = []
    for lo in range(0, 1 << n, chunk):
        idx = np.arange(lo, min(lo + chunk, 1 << n), dtype=np.int64)
        spins = 1 - 2 * ((idx[:, None] >> np.arange(n)) & 1)
        energy = (spins[:, us] * spins[:, vs]).sum(axis=1)
        parts.append(k * energy)
    exponents = np.concatenate(parts).astype(float)
    top = exponents.max()
    return float(top + math.log(math.fsum(np.exp(exponents - top))))


def _row_transfer(beta: float, width: int, J: float = 1.0) -> np.ndarray:
    """Symmetric row-to-row transfer matrix of a periodic row of ``width`` spins."""
    k = beta * J
    states = np.arange(1 << width)
    spins = 1 - 2 * ((states[:, None] >> np.arange(width)) & 1)
    horiz = (spins * np.roll(spins, -1, axis=1)).sum(axis=1)
    vert = spins @ spins.T
    return np.exp(k * (vert + 0.5 * (horiz[:, None] + horiz[None, :])))


def transfer_matrix_log_z(spec: IsingSpec) -> float:
    """Exact ``log Z`` of the L x L torus as ``log Tr T^L`` (L <= 12)."""
    if not spec.periodic:
        raise ValueError("transfer-matrix oracle covers periodic lattices only")
    if spec.L > 12:
        raise ValueError("transfer matrix too large")
    lam = np.linalg.eigvalsh(_row_transfer(spec.beta, spec.L, spec.J))
    top = np.max(np.abs(lam))
    return float(spec.L * math.log(top) + math.log(np.sum((lam / top) ** spec.L)))


def cylinder_log_z_density(beta: float, width: int, J: float = 1.0) -> float:
    """``log Z / N`` of an infinitely long cylinder of circumference ``width``."""
    from scipy.sparse.linalg import LinearOperator, eigsh

    k = beta * J
    n = 1 << width
    states = np.arange(n)
    spins = 1 - 2 * ((states[:, None] >> np.arange(width)) & 1)
    half_diag = np.exp(0.5 * k * (spins * np.roll(spins, -1, axis=1)).sum(axis=1))
    bond = np.array([[math.exp(k), math.exp(-k)], [math.exp(-k), math.exp(k)]])

    def matvec(x):
        y = (half_diag * np.ravel(x)).reshape((2,) * width)
        for ax in range(width):
            y = np.moveaxis(np.tensordot(bond, y, axes=(1, ax)), 0, ax)
        return half_diag * y.reshape(-1)

    op = LinearOperator((n, n), matvec=matvec, dtype=float)
    lam = eigsh(op, k=1, which="LA", tol=1e-13, return_eigenvectors=False)[0]
    return math.log(lam) / width


class CriticalProximityWarning(UserWarning):
    pass


def onsager_log_z_density(beta: float, J: float = 1.0, *, tol: float = 1e-11) -> float:
    """Thermodynamic-limit ``log Z / N`` (that is ``-beta f``) of the square-lattice model.

    Uses the double-integral representation with the inner angular integral
    done in closed form; the remaining integral is adaptive quadrature.
    """
    from scipy.integrate import quad

    from .errors import QuadratureError

    if beta < 0:
        raise ValueError("beta must be non-negative")
    k = beta * J
    if abs(beta - BETA_C / J) < 1e-3:
        warnings.warn(
            f"beta={beta} is within 1e-3 of the critical point {BETA_C / J:.6f}",
            CriticalProximityWarning,
            stacklevel=2,
        )
    if k == 0:
        return math.log(2.0)
    c2 = math.cosh(2 * k) ** 2
    s2 = math.sinh(2 * k)

    def inner(theta):
        a = c2 - s2 * math.cos(theta)
        # (1/2pi) int_0^{2pi} ln(a - b cos t) dt = ln((a + sqrt(a^2 - b^2)) / 2)
        return math.log(0.5 * (a + math.sqrt(max(a * a - s2 * s2, 0.0))))

    val, err = quad(inner, 0.0, math.pi, epsabs=tol, epsrel=tol, limit=200, points=[0.0])
    if err > 1e-9:
        raise QuadratureError(f"quadrature error estimate {err:g} above 1e-9")
    return math.log(2.0) + 0.5 * val / math.pi


def onsager_log_z_density_2d(beta: float, J: float = 1.0) -> float:
    """Same quantity by nested two-dimensional quadrature (slow cross-check)."""
    from scipy.integrate import dblquad

    k = beta * J
    c2 = math.cosh(2 * k) ** 2
    s2 = math.sinh(2 * k)
    val, _ = dblquad(
        lambda t1, t2: math.log(c2 - s2 * (math.cos(t1) + math.cos(t2))),
        0.0, 2 * math.pi, 0.0, 2 * math.pi, epsabs=1e-10, epsrel=1e-10,
    )
    return math.log(2.0) + val / (8 * math.pi**2)


def onsager_free_energy_density(beta: float, J: float = 1.0) -> float:
    """Free energy per site ``f = -(1/beta) log Z / N`` in the thermodynamic limit."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    return -onsager_log_z_density(beta, J) / beta


def bethe_critical_beta(z: int) -> float:
    """Critical coupling of the Ising model on a Bethe lattice of coordination ``z``."""
    return 0.5 * math.log(z / (z - 2))


def bp_critical_beta() -> float:
    return math.log(2.0) / 2.0


# -- BP policy ---------------------------------------------------------------


def paramagnetic_messages(tn: TensorNetwork) -> dict:
    """Messages at the infinite-temperature fixed point ``(1, 0)`` on every edge."""
    from .bp import directed_edges

    vec = np.array([1.0, 0.0], dtype=np.complex128)
    return {d: vec.copy() for d in directed_edges(tn)}


def default_schedule(beta: float, *, seed: int = 0, tol: float = 1e-10, max_iters: int = 5000):
    """Benchmark BP settings: plain updates at high temperature, damped random start below."""
    from .bp import BpSchedule

    if beta <= bp_critical_beta():
        return BpSchedule(damping=0.0, tol=tol, max_iters=max_iters, seed=seed, init="uniform")
    return BpSchedule(damping=0.5, tol=tol, max_iters=max_iters, seed=seed, init="random")


def converge_ising_bp(tn: TensorNetwork, beta: float, schedule=None):
    """Run BP with the benchmark policy.

    At ``beta <= beta_BP`` the infinite-temperature messages are an exact
    fixed point and the one message passing flows to; starting there avoids
    the critical slowing down next to ``beta_BP``.
    """
    from .bp import run_bp

    sched = schedule or default_schedule(beta)
    if schedule is None and beta <= bp_critical_beta():
        return run_bp(tn, sched, messages=paramagnetic_messages(tn))
    return run_bp(tn, sched)


# -- benchmark ---------------------------------------------------------------


def free_energy_density(log_z: float, beta: float, n_sites: int) -> float:
    """``-log Z / (beta N)``; at ``beta = 0`` the dimensionless ``-log Z / N``."""
    if beta == 0:
        return -log_z / n_sites
    return -log_z / (beta * n_sites)


def reference_density(beta: float, J: float = 1.0) -> float:
    """Thermodynamic-limit free energy density on the scale of ``free_energy_density``."""
    return free_energy_density(onsager_log_z_density(beta, J), beta, 1)


@dataclass(frozen=True)
class BenchmarkRow:
    beta: float
    L: int
    m: int
    f_bp: float
    f_cluster: float
    f_loopseries: float
    f_exact_ref: float
    bp_converged: bool
    bp_iterations: int

    @property
    def df_bp(self) -> float:
        return self.f_bp - self.f_exact_ref

    @property
    def df_cluster(self) -> float:
        return self.f_cluster - self.f_exact_ref

    @property
    def df_loopseries(self) -> float:
        return self.f_loopseries - self.f_exact_ref

    COLUMNS = (
        "beta", "L", "m", "f_bp", "f_cluster_m", "f_loopseries_m", "f_exact_ref",
        "df_bp", "df_cluster_m", "df_loopseries_m", "bp_converged", "bp_iterations",
    )

    def as_list(self) -> list[str]:
        f = lambda x: f"{x:.17g}"
        return [
            f(self.beta), str(self.L), str(self.m), f(self.f_bp), f(self.f_cluster),
            f(self.f_loopseries), f(self.f_exact_ref), f(self.df_bp), f(self.df_cluster),
            f(self.df_loopseries), str(int(self.bp_converged)), str(self.bp_iterations),
        ]


@dataclass
class SweepPoint:
    """Everything computed at one ``(beta, L)``: table rows plus loop statistics."""

    beta: float
    L: int
    rows: list[BenchmarkRow]
    loop_stats: dict


def run_point(
    beta: float,
    L: int,
    m: int,
    *,
    catalog=None,
    clusters=None,
    schedule=None,
    threads: int = 1,
    loop_series: bool = True,
    cache_dir=None,
) -> SweepPoint:
    from .enumeration import load_or_build
    from .series import cluster_expansion

    spec = IsingSpec(L, beta)
    tn = build_ising_network(spec)
    if catalog is None:
        g, sym = build_square_lattice(L, True)
        catalog, clusters, _ = load_or_build(g, m, sym, cache_dir)
    msgs, report = converge_ising_bp(tn, beta, schedule)
    ledger = cluster_expansion(
        tn, msgs, catalog, clusters, m, with_loop_series=loop_series, threads=threads
    )
    ref = reference_density(beta)
    n = spec.n_sites
    f_bp = free_energy_density(ledger.log_z0.real, beta, n)
    cutoffs = [0] + sorted(w for w in {len(l) for l in catalog.loops} if w <= m)
    rows = []
    for mm in cutoffs:
        ls = ledger.loop_series.get(mm)
        rows.append(
            BenchmarkRow(
                beta=beta,
                L=L,
                m=mm,
                f_bp=f_bp,
                f_cluster=free_energy_density(ledger.log_z(mm).real, beta, n),
                f_loopseries=(
                    free_energy_density(ls.log_magnitude, beta, n) if ls is not None else math.nan
                ),
                f_exact_ref=ref,
                bp_converged=report.converged,
                bp_iterations=report.iterations,
            )
        )
    return SweepPoint(beta, L, rows, ledger.loop_stats)


def beta_grid(beta_min: float, beta_max: float, steps: int) -> list[float]:
    if steps < 1:
        raise ValueError("steps must be positive")
    if steps == 1:
        return [beta_min]
    return [float(b) for b in np.linspace(beta_min, beta_max, steps)]


def benchmark_sweep(
    betas, sizes, m: int, *, threads: int = 1, cache_dir=None, loop_series: bool = True
) -> list[SweepPoint]:
    """All ``(beta, L)`` points, sorted by ``(L, beta)``.

    The loop and cluster catalogs depend only on ``L`` and are built once
    per size.  A point whose BP run does not converge is kept and flagged.
    """
    from .enumeration import load_or_build

    points = []
    for L in sorted(set(sizes)):
        g, sym = build_square_lattice(L, True)
        catalog, clusters, _ = load_or_build(g, m, sym, cache_dir)
        for beta in sorted(set(betas)):
            points.append(
                run_point(
                    beta, L, m, catalog=catalog, clusters=clusters,
                    threads=threads, loop_series=loop_series,
                )
            )
    return points


def benchmark_csv(points, header: str | None = None) -> str:
    import csv
    import io

    buf = io.StringIO()
    if header:
        buf.write(f"# {header}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BenchmarkRow.COLUMNS)
    for p in points:
        for r in p.rows:
            w.writerow(r.as_list())
    return buf.getvalue()


def loops_csv(points, header: str | None = None) -> str:
    import csv
    import io

    buf = io.StringIO()
    if header:
        buf.write(f"# {header}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["beta", "L", "w", "count", "mean_abs_Zl", "mean_Zl_re", "mean_Zl_im", "max_abs_Zl"])
    for p in points:
        for wt, s in sorted(p.loop_stats.items()):
            w.writerow([
                f"{p.beta:.17g}", p.L, wt, s.count, f"{s.mean_abs:.17g}",
                f"{s.mean.real:.17g}", f"{s.mean.imag:.17g}", f"{s.max_abs:.17g}",
            ])
    return buf.getvalue()


def loop_decay_slope(loop_stats: dict) -> float:
    """Least-squares slope of ``log mean|Z_l|`` against loop weight."""
    ws = sorted(w for w, s in loop_stats.items() if s.mean_abs > 0)
    if len(ws) < 2:
        raise ValueError("need at least two loop weights to fit a slope")
    y = [math.log(loop_stats[w].mean_abs) for w in ws]
    return float(np.polyfit(ws, y, 1)[0])


# -- diagnostics -------------------------------------------------------------


def _angle_map(beta: float, theta: float, J: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """``mu(theta)`` and the unit-norm update ``(mu x mu x mu) * T`` of the bulk tensor."""
    t = site_tensor(4, beta, J).real
    mu = np.array([math.cos(theta), math.sin(theta)])
    nu = np.einsum("abcd,b,c,d->a", t, mu, mu, mu)
    return mu, nu / np.linalg.norm(nu)


def fixed_point_energy(beta: float, theta: float, J: float = 1.0) -> float:
    """``E(theta) = || mu - normalized update ||``, insensitive to the overall sign."""
    mu, nu = _angle_map(beta, theta, J)
    return float(min(np.linalg.norm(mu - nu), np.linalg.norm(mu + nu)))


def _signed_defect(beta: float, theta: float, J: float) -> float:
    # sin of the angle from mu to its image; vanishes exactly at fixed points
    mu, nu = _angle_map(beta, theta, J)
    if mu @ nu < 0:
        nu = -nu
    return float(mu[0] * nu[1] - mu[1] * nu[0])


@dataclass(frozen=True)
class FixedPoint:
    theta: float
    energy: float
    stable: bool


def fixed_point_energy_scan(
    beta: float, thetas, J: float = 1.0, *, xtol: float = 1e-8
) -> tuple[list[tuple[float, float]], list[FixedPoint]]:
    """Sample ``E(theta)`` and locate the fixed points bracketed by the samples.

    Fixed points are sign changes of the signed angular defect, refined by
    bisection to ``xtol`` (plus samples that hit a zero exactly).  A fixed
    point is stable when the angle map contracts there.
    """
    thetas = list(thetas)
    samples = [(float(th), fixed_point_energy(beta, th, J)) for th in thetas]
    roots: list[float] = []
    defects = [_signed_defect(beta, th, J) for th in thetas]
    for i, (th, d) in enumerate(zip(thetas, defects)):
        if abs(d) < 1e-14:
            roots.append(float(th))
        elif i + 1 < len(thetas) and d * defects[i + 1] < 0 and abs(defects[i + 1]) >= 1e-14:
            a, b, fa = th, thetas[i + 1], d
            while b - a > xtol:
                mid = 0.5 * (a + b)
                fm = _signed_defect(beta, mid, J)
                if fm == 0:
                    a = b = mid
                    break
                if (fm < 0) == (fa < 0):
                    a, fa = mid, fm
                else:
                    b = mid
            roots.append(0.5 * (a + b))
    merged: list[float] = []
    for r in roots:
        # theta and theta + pi describe the same message up to sign
        if not any(abs(math.remainder(r - q, math.pi)) < 10 * xtol for q in merged):
            merged.append(float(r))
    fixed = []
    for r in merged:
        h = 1e-6
        # slope of the induced angle map theta -> theta + defect
        slope = 1.0 + (_signed_defect(beta, r + h, J) - _signed_defect(beta, r - h, J)) / (2 * h)
        fixed.append(FixedPoint(r, fixed_point_energy(beta, r, J), abs(slope) < 1.0))
    return samples, fixed


def angle_messages(tn: TensorNetwork, theta: float) -> dict:
    """Translation-invariant messages ``(cos theta, sin theta)`` on every directed edge."""
    from .bp import directed_edges

    vec = np.array([math.cos(theta), math.sin(theta)], dtype=np.complex128)
    return {d: vec.copy() for d in directed_edges(tn)}


def message_perturbation_response(
    spec: IsingSpec, site: int, field_strength: float, schedule=None
) -> dict[int, float]:
    """``Delta(e)``: change of the converged messages on each edge under a local field.

    Both runs share the schedule and starting messages.  Per edge the larger
    of the two directed differences is reported.
    """
    from .bp import BpSchedule, run_bp
    from .errors import BPNotConvergedError

    sched = schedule or BpSchedule(tol=1e-12, max_iters=20000)
    base = build_ising_network(spec)
    pert = build_ising_network(spec, {site: field_strength})
    start = paramagnetic_messages(base) if spec.beta <= bp_critical_beta() else None
    m0, r0 = run_bp(base, sched, messages=start)
    m1, r1 = run_bp(pert, sched, messages=start)
    if not (r0.converged and r1.converged):
        raise BPNotConvergedError(
            f"BP did not converge (residuals {r0.residual:.3g}, {r1.residual:.3g})"
        )
    g = base.graph
    out = {}
    for e, (a, b) in enumerate(g.edges):
        out[e] = max(
            float(np.linalg.norm(m0[(a, b)] - m1[(a, b)])),
            float(np.linalg.norm(m0[(b, a)] - m1[(b, a)])),
        )
    return out
