"""Linear plant model, stacked observation window, and trajectory simulation.

The measurement window convention used everywhere in this package: a window
ending at time i covers steps [i-T+1, i], the stacked measurement vector
lists the newest measurement first, and the matching stacked observation
matrix is

    H = [C A^(T-1); ...; C A; C]

so that y_T = H x_{i-T+1} + e_T holds exactly for noiseless dynamics.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSvd, DimensionMismatch, NotObservable, WindowOutOfRange


def _as_matrix(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be a 2-D matrix, got shape {arr.shape}")
    out = arr.copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class LtiSystem:
    """Discrete-time plant x_{i+1} = A x_i observed through y_i = C x_i.

    The intended operating regime is redundant sensing (more sensors than
    states); the constructor only enforces shape consistency so that small
    hand-built systems remain usable in analysis code.
    """

    A: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", _as_matrix(self.A, "A"))
        object.__setattr__(self, "C", _as_matrix(self.C, "C"))
        if self.A.shape[0] != self.A.shape[1]:
            raise DimensionMismatch(f"A must be square, got shape {self.A.shape}")
        if self.C.shape[1] != self.A.shape[0]:
            raise DimensionMismatch(
                f"C has {self.C.shape[1]} columns but the state dimension is {self.A.shape[0]}"
            )

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True)
class HorizonModel:
    """Stacked T-step observation matrix together with its full SVD factors.

    H = U [Sigma1; 0] V^T with U = [U1 U2]; U1 spans the range of H and the
    columns of U2 span its orthogonal complement.
    """

    T: int
    H: np.ndarray
    U1: np.ndarray
    U2: np.ndarray
    Sigma1: np.ndarray
    V: np.ndarray
    sigma_min: float
    sigma_max: float

    @property
    def n(self) -> int:
        return self.H.shape[1]

    @property
    def rows(self) -> int:
        """Total stacked measurement count T*m."""
        return self.H.shape[0]


@dataclass(frozen=True)
class Trajectory:
    """Exact forward simulation: states, clean and attacked measurements."""

    states: np.ndarray              # (steps, n)
    clean_measurements: np.ndarray  # (steps, m)
    attacked_measurements: np.ndarray

    @property
    def steps(self) -> int:
        return self.states.shape[0]


@dataclass(frozen=True)
class ObservabilityReport:
    """Numerical rank report of the full observability matrix."""

    rank: int
    n: int
    sigma_min_nonzero: float
    sigma_max: float

    @property
    def observable(self) -> bool:
        return self.rank == self.n


def observability_matrix(sys: LtiSystem) -> np.ndarray:
    """Stack [C; CA; ...; C A^(n-1)]."""
    blocks = []
    M = np.eye(sys.n)
    for _ in range(sys.n):
        blocks.append(sys.C @ M)
        M = M @ sys.A
    return np.vstack(blocks)


def check_observability(sys: LtiSystem, rank_rtol: float = 1e-10) -> ObservabilityReport:
    """Rank of the observability matrix via singular values.

    Singular values below rank_rtol * sigma_max are treated as zero.  The
    report carries the verdict; no exception is raised here.
    """
    O = observability_matrix(sys)
    s = np.linalg.svd(O, compute_uv=False)
    smax = float(s[0]) if s.size else 0.0
    if smax == 0.0:
        return ObservabilityReport(rank=0, n=sys.n, sigma_min_nonzero=0.0, sigma_max=0.0)
    nonzero = s[s > rank_rtol * smax]
    return ObservabilityReport(
        rank=int(nonzero.size),
        n=sys.n,
        sigma_min_nonzero=float(nonzero[-1]) if nonzero.size else 0.0,
        sigma_max=smax,
    )


def build_horizon(
    sys: LtiSystem,
    T: int,
    rank_rtol: float = 1e-10,
    degenerate_rtol: float = 1e-12,
) -> HorizonModel:
    """Build the stacked observation matrix for a T-step window and factor it.

    Raises NotObservable when (A, C) is not observable, and DegenerateSvd
    when H itself is numerically rank deficient (possible for short windows
    even on observable systems).
    """
    if T < 1:
        raise ValueError(f"window length T must be >= 1, got {T}")
    report = check_observability(sys, rank_rtol=rank_rtol)
    if not report.observable:
        raise NotObservable(f"observability rank {report.rank} < n = {sys.n}")

    blocks = [sys.C]
    M = np.eye(sys.n)
    for _ in range(T - 1):
        M = M @ sys.A
        blocks.append(sys.C @ M)
    H = np.vstack(blocks[::-1])  # newest first: C A^(T-1) on top, C at the bottom

    U, s, Vt = np.linalg.svd(H, full_matrices=True)
    n = sys.n
    if s.size < n or s[-1] < degenerate_rtol * s[0]:
        raise DegenerateSvd(
            f"H is rank deficient for T={T}: singular values {np.array2string(s, precision=3)}"
        )
    for arr in (H, U, s, Vt):
        arr.flags.writeable = False
    return HorizonModel(
        T=T,
        H=H,
        U1=U[:, :n],
        U2=U[:, n:],
        Sigma1=np.diag(s[:n]),
        V=Vt.T,
        sigma_min=float(s[n - 1]),
        sigma_max=float(s[0]),
    )


def simulate(
    sys: LtiSystem,
    x0,
    steps: int,
    attack_schedule=None,
) -> Trajectory:
    """Run the exact dynamics for `steps` steps starting at x0.

    attack_schedule may be None, an array of shape (steps, m), or a mapping
    {step index: attack vector}; missing steps are attack-free.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape[0] != sys.n:
        raise DimensionMismatch(f"x0 has length {x0.shape[0]}, expected {sys.n}")
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")

    attacks = np.zeros((steps, sys.m))
    if attack_schedule is not None:
        if isinstance(attack_schedule, dict):
            for i, e in attack_schedule.items():
                e = np.asarray(e, dtype=float).reshape(-1)
                if e.shape[0] != sys.m:
                    raise DimensionMismatch(f"attack at step {i} has length {e.shape[0]}, expected {sys.m}")
                if not 0 <= i < steps:
                    raise ValueError(f"attack step {i} outside [0, {steps})")
                attacks[i] = e
        else:
            sched = np.asarray(attack_schedule, dtype=float)
            if sched.shape != (steps, sys.m):
                raise DimensionMismatch(
                    f"attack schedule has shape {sched.shape}, expected {(steps, sys.m)}"
                )
            attacks = sched.copy()

    states = np.zeros((steps, sys.n))
    clean = np.zeros((steps, sys.m))
    x = x0
    for i in range(steps):
        states[i] = x
        clean[i] = sys.C @ x
        x = sys.A @ x
    attacked = clean + attacks
    for arr in (states, clean, attacked):
        arr.flags.writeable = False
    return Trajectory(states=states, clean_measurements=clean, attacked_measurements=attacked)


def stack_window(traj: Trajectory, end_index: int, T: int):
    """Stack the window [end_index-T+1, end_index], newest measurement first.

    Returns (y_T, x_window_start, e_T) satisfying y_T = H x_start + e_T for
    the matching build_horizon(..., T) model.
    """
    start = end_index - T + 1
    if T < 1 or start < 0 or end_index >= traj.steps:
        raise WindowOutOfRange(
            f"window [{start}, {end_index}] does not fit a trajectory of {traj.steps} steps"
        )
    order = range(end_index, start - 1, -1)
    y_T = np.concatenate([traj.attacked_measurements[i] for i in order])
    e_T = np.concatenate(
        [traj.attacked_measurements[i] - traj.clean_measurements[i] for i in order]
    )
    return y_T, traj.states[start].copy(), e_T


# ---------------------------------------------------------------------------
# System file ingestion
# ---------------------------------------------------------------------------

def _check_rectangular(rows, name: str) -> np.ndarray:
    if not rows:
        raise ValueError(f"{name}: empty matrix")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValueError(f"{name}: rows have inconsistent lengths {sorted(widths)}")
    return np.asarray(rows, dtype=float)


def load_system_json(path):
    """Read {"A": [[...]], "C": [[...]], "x0": [...]} and return (system, x0)."""
    with open(path) as fh:
        doc = json.load(fh)
    for key in ("A", "C"):
        if key not in doc:
            raise ValueError(f"system file missing key {key!r}")
        if not isinstance(doc[key], list) or not all(isinstance(r, list) for r in doc[key]):
            raise ValueError(f"system file key {key!r} must be a list of rows")
    A = _check_rectangular(doc["A"], "A")
    C = _check_rectangular(doc["C"], "C")
    sys = LtiSystem(A=A, C=C)
    x0 = None
    if doc.get("x0") is not None:
        x0 = np.asarray(doc["x0"], dtype=float).reshape(-1)
        if x0.shape[0] != sys.n:
            raise ValueError(f"x0 has length {x0.shape[0]}, expected {sys.n}")
    return sys, x0


def read_matrix_csv(path) -> np.ndarray:
    """Read a comma-separated numeric matrix; rejects ragged rows."""
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or all(not c.strip() for c in rec):
                continue
            rows.append([float(c) for c in rec])
    return _check_rectangular(rows, str(path))


def load_system_csv(a_path, c_path) -> LtiSystem:
    """Build a system from two CSV files, one matrix per file."""
    return LtiSystem(A=read_matrix_csv(a_path), C=read_matrix_csv(c_path))
