"""Experiment geometry, accuracy metric, regularization search and sweeps.

A Scenario bundles the simulation study parameters: a spherical target
region of radius R containing a rigid spherical scatterer, microphones on
two spherical shells, a point source outside the region, sensor SNR and the
frequency set. The drivers in this module synthesize measurements, run the
estimators over the regularization grid with oracle (true-NMSE) selection,
and assemble frequency sweeps.

Regularization selection is an exhaustive search over 10**n candidates; the
selected value minimizes the NMSE of the reconstructed incident field on the
evaluation grid, with ties broken toward stronger regularization. This
mirrors choosing the parameters "based on the estimation accuracy" and is
labeled oracle selection in all outputs.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ._validation import check_positions
from .estimators import (
    KernelRidgeFieldEstimator,
    ScatterSeparatedFieldEstimator,
    SingularSystemError,
    solve_kernel_ridge,
    weighting_matrix,
)
from .fields import expansion_matrix, point_source_field, synthesize_measurements
from .kernels import KernelSpec, kernel_matrix
from .sphfuncs import num_modes

__all__ = [
    "SOUND_SPEED_DEFAULT",
    "NMSE_FLOOR_DB",
    "load_pointset",
    "bundled_tdesign_points",
    "fibonacci_sphere_points",
    "random_sphere_points",
    "dual_shell_layout",
    "MicrophoneLayout",
    "Scenario",
    "EvaluationGrid",
    "evaluation_grid",
    "nmse_db",
    "MethodSpec",
    "default_methods",
    "GridSearchResult",
    "grid_search",
    "SweepRecord",
    "frequency_sweep",
]

SOUND_SPEED_DEFAULT = 343.0
NMSE_FLOOR_DB = -300.0
DEFAULT_EXPONENTS = tuple(range(-15, 10))


# ---------------------------------------------------------------------------
# Point sets on the unit sphere
# ---------------------------------------------------------------------------
def load_pointset(path) -> np.ndarray:
    """Unit vectors from a text file: one 'x y z' triple per line, '#' comments."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"{path}:{line_no}: expected three fields, got {len(parts)}")
            rows.append([float(p) for p in parts])
    pts = np.asarray(rows, dtype=float)
    if pts.size == 0:
        raise ValueError(f"{path}: no points found")
    norms = np.linalg.norm(pts, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-6):
        raise ValueError(f"{path}: entries are not unit vectors")
    return pts / norms[:, None]


def bundled_tdesign_points() -> np.ndarray:
    """The packaged 25-point spherical 4-design."""
    ref = resources.files("scatsep.data").joinpath("tdesign_t4_n25.txt")
    with resources.as_file(ref) as path:
        return load_pointset(path)


def fibonacci_sphere_points(count: int) -> np.ndarray:
    """Fibonacci (golden-angle) lattice of `count` unit vectors."""
    if count < 1:
        raise ValueError("count must be >= 1")
    i = np.arange(count)
    z = 1.0 - (2.0 * i + 1.0) / count
    golden = (1.0 + math.sqrt(5.0)) / 2.0
    phi = 2.0 * np.pi * i / golden
    s = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)


def random_sphere_points(count: int, seed=0) -> np.ndarray:
    """Uniformly random unit vectors, deterministic for a given seed."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((count, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def dual_shell_layout(unit_points, radii=(0.5, 0.55), count=None, second_unit_points=None):
    """Microphone positions on two concentric shells.

    The same angular point set is scaled to both radii unless a second set
    is supplied. `count` (points per shell) is validated against the
    provider output when given.
    """
    unit_points = check_positions(unit_points, "unit_points")
    second = unit_points if second_unit_points is None else check_positions(
        second_unit_points, "second_unit_points"
    )
    if count is not None and (len(unit_points) != count or len(second) != count):
        raise ValueError(
            f"point-set provider yielded {len(unit_points)}/{len(second)} points, "
            f"expected {count} per shell"
        )
    for pts, name in ((unit_points, "unit_points"), (second, "second_unit_points")):
        norms = np.linalg.norm(pts, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError(f"{name} must be unit vectors")
    if len(radii) != 2 or radii[0] <= 0 or radii[1] <= 0:
        raise ValueError("radii must be two positive shell radii")
    return np.vstack([radii[0] * unit_points, radii[1] * second])


@dataclass(frozen=True)
class MicrophoneLayout:
    """Dual-shell microphone arrangement descriptor.

    provider: 'tdesign' (packaged 25-point 4-design), 'file' (pointset_path),
    'fibonacci' or 'random'. The second shell reuses the first shell's
    angular set unless second_pointset_path is given (file format as above).
    """

    radii: tuple[float, float] = (0.5, 0.55)
    count_per_shell: int = 25
    provider: str = "tdesign"
    pointset_path: str | None = None
    second_pointset_path: str | None = None
    pointset_seed: int = 0

    def unit_points(self) -> np.ndarray:
        if self.provider == "tdesign":
            pts = bundled_tdesign_points()
            if len(pts) != self.count_per_shell:
                raise ValueError(
                    f"bundled t-design has {len(pts)} points, "
                    f"layout requests {self.count_per_shell}"
                )
            return pts
        if self.provider == "file":
            if not self.pointset_path:
                raise ValueError("provider 'file' requires pointset_path")
            pts = load_pointset(self.pointset_path)
            if len(pts) != self.count_per_shell:
                raise ValueError(
                    f"point-set file has {len(pts)} points, "
                    f"layout requests {self.count_per_shell}"
                )
            return pts
        if self.provider == "fibonacci":
            return fibonacci_sphere_points(self.count_per_shell)
        if self.provider == "random":
            return random_sphere_points(self.count_per_shell, self.pointset_seed)
        raise ValueError(f"unknown point-set provider '{self.provider}'")

    def positions(self) -> np.ndarray:
        second = None
        if self.second_pointset_path:
            second = load_pointset(self.second_pointset_path)
        return dual_shell_layout(
            self.unit_points(), self.radii, self.count_per_shell, second
        )


# ---------------------------------------------------------------------------
# Scenario
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Scenario:
    """Simulation-study configuration (defaults reproduce the headline study)."""

    region_radius: float = 0.5
    scatterer_radius: float = 0.3
    source: tuple[float, float, float] = (2.0, 2.0, 0.0)
    snr_db: float | None = 40.0
    frequencies: tuple[float, ...] = tuple(float(f) for f in range(100, 1001, 50))
    sound_speed: float = SOUND_SPEED_DEFAULT
    noise_seed: int = 12345
    grid_spacing: float = 0.05
    include_scatterer_interior: bool = True
    layout: MicrophoneLayout = field(default_factory=MicrophoneLayout)

    def wavenumber(self, frequency: float) -> float:
        return 2.0 * np.pi * float(frequency) / self.sound_speed

    def truncation_order(self, frequency: float, multiplier: int = 1) -> int:
        """Truncation rule N = multiplier * ceil(k R)."""
        return multiplier * int(np.ceil(self.wavenumber(frequency) * self.region_radius))

    def microphones(self) -> np.ndarray:
        return self.layout.positions()

    def noise_seed_for(self, frequency: float):
        """Per-frequency child seed; stable across runs and sweep orderings."""
        return np.random.SeedSequence([int(self.noise_seed), int(round(frequency * 1000))])

    def synthesize(self, frequency: float) -> np.ndarray:
        """Measurements at this frequency (point source + scatterer + noise)."""
        return synthesize_measurements(
            self.microphones(),
            np.asarray(self.source, dtype=float),
            self.scatterer_radius,
            self.wavenumber(frequency),
            self.snr_db,
            self.noise_seed_for(frequency),
        )

    def evaluation_grid(self) -> "EvaluationGrid":
        return evaluation_grid(
            self.region_radius,
            self.grid_spacing,
            include_scatterer_interior=self.include_scatterer_interior,
            scatterer_radius=self.scatterer_radius,
        )

    def violations(self) -> list[str]:
        """All constraint violations of the geometry (empty when valid)."""
        problems = []
        if not 0.0 <= self.scatterer_radius < self.region_radius:
            problems.append(
                f"scatterer radius {self.scatterer_radius} must satisfy "
                f"0 <= a < R = {self.region_radius}"
            )
        try:
            mics = self.microphones()
        except (ValueError, OSError) as exc:
            problems.append(f"microphone layout invalid: {exc}")
            mics = None
        if mics is not None:
            radii = np.linalg.norm(mics, axis=1)
            inside = np.flatnonzero(radii <= self.scatterer_radius)
            for m in inside:
                problems.append(
                    f"microphone {m} at radius {radii[m]:.3f} m inside the "
                    f"scatterer (a = {self.scatterer_radius} m)"
                )
        src_norm = float(np.linalg.norm(np.asarray(self.source, dtype=float)))
        if src_norm <= self.region_radius:
            problems.append(
                f"source at radius {src_norm:.3f} m inside the region "
                f"(R = {self.region_radius} m)"
            )
        if len(self.frequencies) == 0:
            problems.append("no frequencies configured")
        if any(f <= 0 for f in self.frequencies):
            problems.append("frequencies must be positive")
        if self.sound_speed <= 0:
            problems.append("sound speed must be positive")
        if self.grid_spacing <= 0:
            problems.append("grid spacing must be positive")
        return problems


# ---------------------------------------------------------------------------
# Evaluation grid and NMSE
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class EvaluationGrid:
    positions: np.ndarray
    spacing: float

    def __len__(self) -> int:
        return len(self.positions)


def evaluation_grid(
    region_radius: float,
    spacing: float = 0.05,
    include_scatterer_interior: bool = True,
    scatterer_radius: float = 0.0,
) -> EvaluationGrid:
    """Cubic lattice of evaluation points with |r| <= region_radius.

    The lattice is centered at the origin with the given spacing; points
    inside the scatterer are kept by default and dropped when
    include_scatterer_interior is False.
    """
    if spacing <= 0.0:
        raise ValueError("spacing must be positive")
    n_half = int(np.floor(region_radius / spacing + 1e-12))
    axis = np.arange(-n_half, n_half + 1) * spacing
    gx, gy, gz = np.meshgrid(axis, axis, axis, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    r = np.linalg.norm(pts, axis=1)
    keep = r <= region_radius + 1e-12
    if not include_scatterer_interior:
        keep &= r >= scatterer_radius - 1e-12
    return EvaluationGrid(pts[keep], spacing)


def nmse_db(estimate, truth, grid: EvaluationGrid | None = None) -> float:
    """Normalized mean square error in dB over the evaluation points.

    `estimate` and `truth` are either complex value arrays on the same point
    set or callables evaluated on `grid`. An exact match is floored at
    NMSE_FLOOR_DB; an identically-zero truth raises.
    """
    if callable(estimate):
        estimate = estimate(grid.positions)
    if callable(truth):
        truth = truth(grid.positions)
    estimate = np.asarray(estimate, dtype=complex).ravel()
    truth = np.asarray(truth, dtype=complex).ravel()
    if estimate.shape != truth.shape or estimate.size == 0:
        raise ValueError("estimate and truth must be non-empty and congruent")
    denom = float(np.sum(np.abs(truth) ** 2))
    if denom == 0.0:
        raise ValueError("truth field is identically zero on the grid")
    ratio = float(np.sum(np.abs(truth - estimate) ** 2)) / denom
    if ratio <= 10.0 ** (NMSE_FLOOR_DB / 10.0):
        return NMSE_FLOOR_DB
    return 10.0 * math.log10(ratio)


# ---------------------------------------------------------------------------
# Methods and grid search
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class MethodSpec:
    """An estimator variant of the study.

    kind 'krr' ignores the other fields; kind 'proposed' carries the
    weighting mode and the truncation-rule multiplier (N = multiplier *
    ceil(kR)).
    """

    kind: str
    weighting: str | None = None
    truncation_multiplier: int | None = None

    def __post_init__(self):
        if self.kind == "krr":
            if self.weighting is not None or self.truncation_multiplier is not None:
                raise ValueError("krr takes no weighting/truncation options")
        elif self.kind == "proposed":
            if self.weighting not in ("identity", "smoothness"):
                raise ValueError("weighting must be 'identity' or 'smoothness'")
            if self.truncation_multiplier not in (1, 2):
                raise ValueError("truncation_multiplier must be 1 or 2")
        else:
            raise ValueError(f"unknown method kind '{self.kind}'")

    @property
    def label(self) -> str:
        if self.kind == "krr":
            return "krr"
        w = "w" if self.weighting == "smoothness" else "i"
        n = "kr" if self.truncation_multiplier == 1 else "2kr"
        return f"proposed_{w}_{n}"

    @classmethod
    def from_label(cls, label: str) -> "MethodSpec":
        if label == "krr":
            return cls("krr")
        parts = label.split("_")
        if len(parts) == 3 and parts[0] == "proposed":
            weighting = {"w": "smoothness", "i": "identity"}.get(parts[1])
            multiplier = {"kr": 1, "2kr": 2}.get(parts[2])
            if weighting and multiplier:
                return cls("proposed", weighting, multiplier)
        raise ValueError(f"unknown method label '{label}'")


def default_methods() -> list[MethodSpec]:
    """KRR plus the four proposed variants, in reporting order."""
    return [
        MethodSpec("krr"),
        MethodSpec("proposed", "identity", 1),
        MethodSpec("proposed", "identity", 2),
        MethodSpec("proposed", "smoothness", 1),
        MethodSpec("proposed", "smoothness", 2),
    ]


@dataclass
class GridSearchResult:
    method: MethodSpec
    frequency: float
    truncation_order: int | None
    nmse_db: float
    reg: float | None  # krr lambda
    reg_incident: float | None  # proposed lambda_1
    reg_scatter: float | None  # proposed lambda_2
    estimator: object
    candidates: dict
    n_failed: int


class _FrequencyWorkspace:
    """Measurements, truth and kernel matrices shared by one frequency's fits."""

    def __init__(self, scenario: Scenario, frequency: float):
        self.scenario = scenario
        self.frequency = float(frequency)
        self.k = scenario.wavenumber(frequency)
        self.mics = scenario.microphones()
        self.s = scenario.synthesize(frequency)
        self.grid = scenario.evaluation_grid()
        self.truth = point_source_field(
            np.asarray(scenario.source, dtype=float), self.k, self.grid.positions
        )
        self.denom = float(np.sum(np.abs(self.truth) ** 2))
        spec = KernelSpec(k=self.k)
        K = kernel_matrix(spec, self.mics, self.mics)
        self.K = 0.5 * (K + K.conj().T)
        self.K_cross = kernel_matrix(spec, self.grid.positions, self.mics)

    def nmse_of_alpha(self, alpha) -> float:
        ratio = float(
            np.sum(np.abs(self.truth - self.K_cross @ alpha) ** 2) / self.denom
        )
        if ratio <= 10.0 ** (NMSE_FLOOR_DB / 10.0):
            return NMSE_FLOOR_DB
        return 10.0 * math.log10(ratio)


def _krr_search(ws: _FrequencyWorkspace, lambdas) -> tuple[dict, int]:
    candidates = {}
    failed = 0
    for lam in sorted(lambdas, reverse=True):
        try:
            alpha = solve_kernel_ridge(ws.K, ws.s, lam)
            v = ws.nmse_of_alpha(alpha)
        except (np.linalg.LinAlgError, ValueError):
            failed += 1
            continue
        if np.isfinite(v):
            candidates[lam] = v
        else:
            failed += 1
    return candidates, failed


def _pivot_ok(cf) -> bool:
    d = np.abs(np.diag(cf[0]))
    dmax = d.max()
    return dmax > 0.0 and (d.min() / dmax) ** 2 > 1e-12


def _estimator_from_solution(ws, method, order, lam1, lam2, Phi, W, alpha, u, loading):
    """Assemble a fitted ScatterSeparatedFieldEstimator from scan output."""
    from .estimators import JointDiagnostics

    est = ScatterSeparatedFieldEstimator(
        wavenumber=ws.k,
        max_order=order,
        reg_incident=lam1,
        reg_scatter=lam2,
        weighting=method.weighting,
    )
    est.mics_ = ws.mics
    est.gram_ = ws.K
    est.expansion_matrix_ = Phi
    est.weighting_matrix_ = W
    est.alpha_ = alpha
    est.scatter_coeffs_ = u
    est.diagnostics_ = JointDiagnostics(loading > 0.0, loading)
    return est


class _JointScan:
    """Exhaustive scan of (lambda_1, lambda_2) by true NMSE.

    For each lambda_2 the scattering block Phi^H Phi + lambda_2 W is
    factored once and alpha is obtained from the reduced M x M system
    (K + lambda_1 I - P K) alpha = (I - P) s with P = Phi (Phi^H Phi +
    lambda_2 W)^{-1} Phi^H; this satisfies the same stationarity equations
    as solve_joint_separation and shares the singularity/loading fallback.
    The winning pair's coefficient vectors are retained so the reported fit
    is exactly the one whose NMSE won the search.
    """

    def __init__(self, ws: _FrequencyWorkspace, Phi, W, lambdas):
        self.candidates: dict = {}
        self.n_failed = 0
        self.best = None  # (nmse, (lam1, lam2), alpha, loading)
        M, n_modes = Phi.shape
        PhiH = Phi.conj().T
        A0 = PhiH @ Phi
        A0 = 0.5 * (A0 + A0.conj().T)
        eps_w = 1e-10 * float(np.trace(W).real) / n_modes
        eye_m = np.eye(M)
        lam_desc = sorted(lambdas, reverse=True)
        best_factor = None
        for lam2 in lam_desc:
            loading = 0.0
            try:
                cf = cho_factor(A0 + lam2 * W)
                if not _pivot_ok(cf):
                    raise np.linalg.LinAlgError
            except np.linalg.LinAlgError:
                loading = eps_w
                try:
                    cf = cho_factor(A0 + lam2 * (W + eps_w * np.eye(n_modes)))
                    if not _pivot_ok(cf):
                        raise np.linalg.LinAlgError
                except np.linalg.LinAlgError:
                    self.n_failed += len(lam_desc)
                    continue
            P = Phi @ cho_solve(cf, PhiH)
            rhs0 = ws.s - P @ ws.s
            PK = P @ ws.K
            alphas = np.empty((M, len(lam_desc)), dtype=complex)
            ok = np.ones(len(lam_desc), dtype=bool)
            for i, lam1 in enumerate(lam_desc):
                try:
                    alphas[:, i] = np.linalg.solve(ws.K + lam1 * eye_m - PK, rhs0)
                except np.linalg.LinAlgError:
                    ok[i] = False
            est = ws.K_cross @ alphas
            ratios = np.sum(np.abs(ws.truth[:, None] - est) ** 2, axis=0) / ws.denom
            for i, lam1 in enumerate(lam_desc):
                if not ok[i] or not np.isfinite(ratios[i]):
                    self.n_failed += 1
                    continue
                r = max(float(ratios[i]), 10.0 ** (NMSE_FLOOR_DB / 10.0))
                value = 10.0 * math.log10(r)
                self.candidates[(lam1, lam2)] = value
                if self.best is None or value < self.best[0]:
                    self.best = (value, (lam1, lam2), alphas[:, i].copy(), loading)
                    best_factor = cf
        if self.best is not None:
            # scattering coefficients of the winner, from the same factor
            _, _, alpha, loading = self.best
            self.best_u = cho_solve(best_factor, PhiH @ (ws.s - ws.K @ alpha))


def grid_search(
    scenario: Scenario,
    frequency: float,
    method: MethodSpec,
    exponents=DEFAULT_EXPONENTS,
    workspace: _FrequencyWorkspace | None = None,
) -> GridSearchResult:
    """Oracle regularization search for one method at one frequency.

    Every 10**n candidate (pairs for the proposed method) is evaluated by
    the NMSE of its reconstructed incident field on the evaluation grid; the
    argmin wins, ties broken toward larger regularization. The winning
    parameters are refit with the canonical solver and that fit's NMSE is
    reported.
    """
    ws = workspace or _FrequencyWorkspace(scenario, frequency)
    lambdas = [10.0**n for n in exponents]
    if not lambdas:
        raise ValueError("empty regularization grid")

    if method.kind == "krr":
        candidates, failed = _krr_search(ws, lambdas)
        if not candidates:
            raise SingularSystemError(
                f"all {len(lambdas)} KRR candidates failed at {frequency} Hz",
                reason="regularization",
            )
        # dict preserves descending-lambda insertion order: min() keeps the
        # largest lambda among exact ties
        best_lam = min(candidates, key=candidates.get)
        est = KernelRidgeFieldEstimator(wavenumber=ws.k, reg=best_lam).fit(ws.mics, ws.s)
        value = ws.nmse_of_alpha(est.alpha_)
        return GridSearchResult(
            method, ws.frequency, None, value, best_lam, None, None, est,
            candidates, failed,
        )

    order = scenario.truncation_order(frequency, method.truncation_multiplier)
    Phi = expansion_matrix(ws.mics, order, ws.k)
    if method.weighting == "smoothness":
        W = weighting_matrix(ws.mics, order, ws.k)
    else:
        W = np.eye(num_modes(order), dtype=complex)
    scan = _JointScan(ws, Phi, W, lambdas)
    if scan.best is None:
        raise SingularSystemError(
            f"all {len(lambdas)**2} joint candidates failed at {frequency} Hz "
            f"({method.label})",
            reason="regularization",
        )
    value, (lam1, lam2), alpha, loading = scan.best
    est = _estimator_from_solution(
        ws, method, order, lam1, lam2, Phi, W, alpha, scan.best_u, loading
    )
    return GridSearchResult(
        method, ws.frequency, order, value, None, lam1, lam2, est,
        scan.candidates, scan.n_failed,
    )


# ---------------------------------------------------------------------------
# Frequency sweep
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class SweepRecord:
    frequency: float
    method: str
    truncation_order: int | None
    weighting: str | None
    reg_incident: float | None
    reg_scatter: float | None
    nmse_db: float | None
    status: str = "ok"


def _sweep_one_frequency(args) -> list[SweepRecord]:
    scenario, frequency, methods, exponents = args
    ws = _FrequencyWorkspace(scenario, frequency)
    records = []
    for method in methods:
        try:
            res = grid_search(scenario, frequency, method, exponents, workspace=ws)
        except (SingularSystemError, np.linalg.LinAlgError, ValueError) as exc:
            records.append(
                SweepRecord(
                    frequency, method.label,
                    None if method.kind == "krr"
                    else scenario.truncation_order(frequency, method.truncation_multiplier),
                    method.weighting, None, None, None,
                    status=f"failed: {exc}",
                )
            )
            continue
        if method.kind == "krr":
            records.append(
                SweepRecord(frequency, "krr", None, None, res.reg, None, res.nmse_db)
            )
        else:
            records.append(
                SweepRecord(
                    frequency, method.label, res.truncation_order, method.weighting,
                    res.reg_incident, res.reg_scatter, res.nmse_db,
                )
            )
    return records


def frequency_sweep(
    scenario: Scenario,
    methods: list[MethodSpec] | None = None,
    exponents=DEFAULT_EXPONENTS,
    threads: int = 1,
) -> list[SweepRecord]:
    """Grid search of every (frequency, method) cell of the scenario.

    Cells are independent; threads > 1 distributes frequencies over worker
    processes. Records are sorted by (frequency, method label) so the output
    does not depend on execution order; failed cells carry a status message.
    """
    methods = list(methods) if methods is not None else default_methods()
    tasks = [(scenario, float(f), methods, tuple(exponents)) for f in scenario.frequencies]
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(_sweep_one_frequency, tasks))
    else:
        chunks = [_sweep_one_frequency(t) for t in tasks]
    records = [rec for chunk in chunks for rec in chunk]
    records.sort(key=lambda r: (r.frequency, r.method))
    return records
