"""Mixed-state quantum geometric tensor and gauge curvature.

The tensor Q_{nu mu} is computed along two independent routes:

* ``msqgt_covariant_route`` -- Gram matrix <D_nu psi|D_mu psi> of covariant
  derivatives of a purification lift;
* ``msqgt_eigenroute`` -- spectral formula
  sum_{ik} p_i/(p_i+p_k)^2 <i|d_nu rho|k><k|d_mu rho|i>
  working directly on the density matrix.

Re Q is the Bures metric, Im Q the mean-gauge-curvature part.  The two
routes share no code below the eigendecomposition, on purpose: their
agreement is a correctness check and must stay falsifiable.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    InconsistentStencilError,
    NonHermitianDerivativeError,
    RankDeficientError,
    ValidationError,
)
from .states import RANK_TOL
from .bundle import EnvOperator, covariant_derivative, env_expectation

STRUCTURE_TOL = 1e-9
METRIC_PSD_TOL = 1e-9
CURVATURE_STENCIL_STEP = 1e-4
CURVATURE_JUMP_TOL = 0.1


def _default_chart(n):
    return [f"x{i}" for i in range(n)]


class QGTensor:
    """Quantum geometric tensor on a parameter chart.

    Structural properties (Re symmetric, Im antisymmetric, Re positive
    semidefinite) are measured at construction and stored as residuals;
    violations beyond tolerance raise.  When ``mirrored`` is set the
    lower triangle was filled by conjugation and the symmetry residuals
    are trivially zero -- use an unmirrored tensor to test symmetry.
    """

    def __init__(self, entries, chart=None, tol=STRUCTURE_TOL, psd_tol=METRIC_PSD_TOL,
                 mirrored=False):
        entries = np.asarray(entries, dtype=complex)
        n = entries.shape[0]
        if entries.shape != (n, n):
            raise ValidationError(f"QGT entries must be square, got {entries.shape}")
        self.entries = entries
        self.chart = list(chart) if chart is not None else _default_chart(n)
        if len(self.chart) != n:
            raise ValidationError(
                f"chart has {len(self.chart)} labels for a {n}x{n} tensor"
            )
        self.mirrored = bool(mirrored)
        re, im = entries.real, entries.imag
        self.sym_residual = float(np.max(np.abs(re - re.T))) if n else 0.0
        self.antisym_residual = float(np.max(np.abs(im + im.T))) if n else 0.0
        if self.sym_residual > tol:
            raise ValidationError(
                f"real part not symmetric: residual {self.sym_residual:.3e} > {tol:.1e}"
            )
        if self.antisym_residual > tol:
            raise ValidationError(
                f"imaginary part not antisymmetric: residual {self.antisym_residual:.3e}"
                f" > {tol:.1e}"
            )
        metric = 0.5 * (re + re.T)
        self.min_metric_eigenvalue = float(np.linalg.eigvalsh(metric).min()) if n else 0.0
        if self.min_metric_eigenvalue < -psd_tol:
            raise ValidationError(
                f"metric has negative eigenvalue {self.min_metric_eigenvalue:.3e}"
            )

    @property
    def dim(self):
        return self.entries.shape[0]

    def __repr__(self):
        return f"QGTensor(chart={self.chart})"


def bures_metric(q):
    """Real part of the tensor: the Bures metric g_{nu mu}."""
    return q.entries.real.copy()


def mean_curvature_part(q):
    """Imaginary part of the tensor (antisymmetric curvature part)."""
    return q.entries.imag.copy()


def qgt_to_json(q):
    return {
        "chart": list(q.chart),
        "re": q.entries.real.tolist(),
        "im": q.entries.imag.tolist(),
    }


def _check_derivatives(drho_list, dim, herm_tol):
    mats = []
    for mu, d in enumerate(drho_list):
        d = np.asarray(d, dtype=complex)
        if d.shape != (dim, dim):
            raise ValidationError(
                f"derivative {mu} has shape {d.shape}, expected {(dim, dim)}"
            )
        asym = float(np.max(np.abs(d - d.conj().T)))
        if asym > herm_tol:
            raise NonHermitianDerivativeError(
                f"derivative {mu} not Hermitian: max|d - d^dag| = {asym:.3e}"
                f" > {herm_tol:.1e}"
            )
        mats.append(d)
    return mats


def msqgt_eigenroute(rho, drho_list, chart=None, mirror=False, herm_tol=STRUCTURE_TOL):
    """Spectral-route tensor from a density matrix and its derivatives.

    Q_{nu mu} = sum_{ik} p_i / (p_i + p_k)^2 * M_nu[i,k] M_mu[k,i]
    with M = V^dag (d rho) V in the eigenbasis of rho.  Full rank is
    required (the weights blow up on a null eigenvalue pair).
    """
    if not rho.full_rank:
        raise RankDeficientError(
            f"state min eigenvalue {rho.min_eigenvalue:.3e} <= rank floor"
            f" {rho.rank_tol:.1e}"
        )
    mats = _check_derivatives(drho_list, rho.dim, herm_tol)
    p = rho.eigenvalues
    basis = rho.eigenvectors
    weights = p[:, None] / (p[:, None] + p[None, :]) ** 2
    m = [basis.conj().T @ d @ basis for d in mats]
    n = len(m)
    q = np.zeros((n, n), dtype=complex)
    for nu in range(n):
        for mu in range(nu if mirror else 0, n):
            q[nu, mu] = np.sum(weights * m[nu] * m[mu].T)
        if mirror:
            for mu in range(nu):
                q[nu, mu] = np.conj(q[mu, nu])
    return QGTensor(q, chart=chart, mirrored=mirror)


def msqgt_covariant_route(psi, tangents, chart=None, rank_tol=RANK_TOL):
    """Covariant-derivative route: Q_{nu mu} = <D_nu psi|D_mu psi>.

    ``tangents`` are the parameter derivatives of any smooth purification
    lift; the connection subtraction removes the lift dependence.
    """
    horiz = [covariant_derivative(psi, x, rank_tol=rank_tol).components for x in tangents]
    n = len(horiz)
    q = np.empty((n, n), dtype=complex)
    for nu in range(n):
        for mu in range(n):
            q[nu, mu] = np.vdot(horiz[nu], horiz[mu])
    return QGTensor(q, chart=chart)


def pure_qgt(xi, dxi_list, chart=None, norm_tol=1e-10):
    """Pure-state tensor <d_nu xi|d_mu xi> - <d_nu xi|xi><xi|d_mu xi>."""
    xi = np.asarray(xi, dtype=complex).ravel()
    nrm = float(np.linalg.norm(xi))
    if abs(nrm - 1.0) > norm_tol:
        raise ValidationError(f"state norm {nrm!r} deviates from 1 by more than {norm_tol:.1e}")
    dxi = [np.asarray(d, dtype=complex).ravel() for d in dxi_list]
    n = len(dxi)
    q = np.empty((n, n), dtype=complex)
    overlaps = [np.vdot(xi, d) for d in dxi]
    for nu in range(n):
        for mu in range(n):
            q[nu, mu] = np.vdot(dxi[nu], dxi[mu]) - np.conj(overlaps[nu]) * overlaps[mu]
    return QGTensor(q, chart=chart)


class CurvatureTensor:
    """Antisymmetric field-strength blocks T_{nu mu} (Hermitian operators)."""

    def __init__(self, blocks, chart=None, antisym_tol=1e-8, herm_tol=1e-8):
        blocks = np.asarray(blocks, dtype=complex)
        n = blocks.shape[0]
        self.blocks = blocks
        self.chart = list(chart) if chart is not None else _default_chart(n)
        swapped = np.transpose(blocks, (1, 0, 2, 3))
        self.antisym_residual = float(np.max(np.abs(blocks + swapped))) if n else 0.0
        dag = np.conj(np.transpose(blocks, (0, 1, 3, 2)))
        self.herm_residual = float(np.max(np.abs(blocks - dag))) if n else 0.0
        if self.antisym_residual > antisym_tol:
            raise ValidationError(
                f"curvature not antisymmetric: residual {self.antisym_residual:.3e}"
            )
        if self.herm_residual > herm_tol:
            raise ValidationError(
                f"curvature blocks not Hermitian: residual {self.herm_residual:.3e}"
            )

    def expectation(self, psi):
        """sigma_{nu mu} = (1/2) <psi|(I (x) T_{nu mu})|psi> for every pair."""
        n = self.blocks.shape[0]
        sigma = np.empty((n, n), dtype=complex)
        for nu in range(n):
            for mu in range(n):
                sigma[nu, mu] = 0.5 * env_expectation(psi, self.blocks[nu, mu])
        return sigma


def _as_matrices(ops):
    return [op.mat if isinstance(op, EnvOperator) else np.asarray(op, dtype=complex)
            for op in ops]


def gauge_curvature(connection_field, point, step=CURVATURE_STENCIL_STEP,
                    jump_tol=CURVATURE_JUMP_TOL, chart=None):
    """Field strength T_{nu mu} = d_nu A_mu - d_mu A_nu - i[A_nu, A_mu].

    ``connection_field`` maps a chart point to the list of connection
    operators (one per direction).  Partial derivatives are taken by a
    central stencil of width ``step``; a stencil value jumping by more
    than ``jump_tol`` from the centre indicates a gauge/phase branch
    discontinuity and raises InconsistentStencilError rather than
    differentiating garbage.
    """
    point = np.asarray(point, dtype=float)
    center = _as_matrices(connection_field(point))
    n = len(center)
    dim = center[0].shape[0]

    d_a = []
    for nu in range(n):
        offset = np.zeros_like(point)
        offset[nu] = step
        plus = _as_matrices(connection_field(point + offset))
        minus = _as_matrices(connection_field(point - offset))
        for side, ops in (("+", plus), ("-", minus)):
            for mu in range(n):
                jump = float(np.max(np.abs(ops[mu] - center[mu])))
                if jump > jump_tol:
                    raise InconsistentStencilError(
                        f"connection component {mu} jumps by {jump:.3e} across the"
                        f" {side}{step:g} stencil in direction {nu}; refusing to"
                        " differentiate across a discontinuity"
                    )
        d_a.append([(plus[mu] - minus[mu]) / (2 * step) for mu in range(n)])

    blocks = np.zeros((n, n, dim, dim), dtype=complex)
    for nu in range(n):
        for mu in range(nu + 1, n):
            comm = center[nu] @ center[mu] - center[mu] @ center[nu]
            t = d_a[nu][mu] - d_a[mu][nu] - 1j * comm
            blocks[nu, mu] = t
            blocks[mu, nu] = -t
    return CurvatureTensor(blocks, chart=chart)


@dataclass
class ThermalSweepEntry:
    beta: float
    tensor: QGTensor
    deviation: float


@dataclass
class ThermalSweepResult:
    """Tensor along an inverse-temperature sweep against its pure limit."""

    entries: list
    pure_tensor: QGTensor
    truncated_at: float | None = None

    @property
    def betas(self):
        return [e.beta for e in self.entries]

    @property
    def deviations(self):
        return [e.deviation for e in self.entries]


def thermal_limit_sweep(model, point, betas, h=1e-5):
    """Sweep the tensor of a thermal family toward the zero-temperature limit.

    For each beta the spectral-route tensor is compared (max-abs entry
    difference) against the pure-state tensor of the ground-state family.
    The sweep truncates, recording ``truncated_at``, once the thermal
    state falls below the rank floor.
    """
    from . import models as _models

    point = np.asarray(point, dtype=float)
    xi = model.ground_state(point)
    n = len(point)
    dxi = []
    for mu in range(n):
        offset = np.zeros(n)
        offset[mu] = h
        dxi.append((model.ground_state(point + offset)
                    - model.ground_state(point - offset)) / (2 * h))
    pure = pure_qgt(xi, dxi, chart=list(model.param_labels))

    entries = []
    truncated_at = None
    for beta in betas:
        mb = model.with_beta(beta)
        rho = mb.evaluate(point)
        if mb.has_analytic_derivatives:
            drho = mb.analytic_derivatives(point)
        else:
            drho = _models.derivatives(mb, point, scheme="central", h=h)
        try:
            q = msqgt_eigenroute(rho, drho, chart=list(model.param_labels))
        except RankDeficientError:
            truncated_at = float(beta)
            break
        deviation = float(np.max(np.abs(q.entries - pure.entries)))
        entries.append(ThermalSweepEntry(float(beta), q, deviation))
    return ThermalSweepResult(entries=entries, pure_tensor=pure, truncated_at=truncated_at)
