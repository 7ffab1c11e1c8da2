"""Iterative transfer protocol on the one-excitation sector.

The chain state stays factorized as

    sum_mu a_mu exp(-i mu B T) (sum_k c_k |mu at site k>),

so the engine tracks one N-component spatial vector c regardless of d:
evolution is a mode-sum matrix-vector product, the receiver measurement
either delivers the payload (probability |c_N|^2) or projects c_N to zero
with a 1/sqrt(1-P) renormalization, and the field only accumulates the
level phase exp(-i mu B T) undone by phase_correction on delivery.
"""

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from .kernels import probability_series
from .sector_dynamics import ChainSpec, PropagatorMode, as_mode, sector_basis

DEFAULT_GRID_STEP = 0.01  # in Jt units
LATER_WINDOW_JT = 10.0

# grid peaks below max(1e-12, 1e-6 * window max) are numerical ripple
PEAK_FLOOR_ABS = 1e-12
PEAK_FLOOR_REL = 1e-6

GLOBAL_TIE_TOL = 1e-12


class Outcome(Enum):
    SUCCESS = "success"
    FAILURE = "failure"
    FORCED = "forced"  # scripted rather than sampled, used in records


class PeakCriterion(Enum):
    FIRST_PEAK = "first-peak"
    GLOBAL_MAX = "global-max"


@dataclass(frozen=True)
class LogicalPayload:
    """Coefficients a_1..a_{d-1} on the nonzero levels; level 0 carries no
    amplitude by construction."""

    d: int
    a: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=complex)
        if a.shape != (self.d - 1,):
            raise ValueError(
                f"payload needs {self.d - 1} coefficients, got {a.shape}"
            )
        if abs(np.linalg.norm(a) - 1.0) > 1e-12:
            raise ValueError("payload coefficients must be normalized")
        object.__setattr__(self, "a", a)


@dataclass
class SectorState:
    """Factorized protocol state; norm_factor is the probability weight of
    the realized measurement branch."""

    spec: ChainSpec
    spatial: np.ndarray
    elapsed: float
    payload: LogicalPayload
    norm_factor: float = 1.0


class OptimizeResult(NamedTuple):
    t: float
    p: float
    at_endpoint: bool  # no interior peak found, endpoint reported


@dataclass(frozen=True)
class IterationRecord:
    k: int
    t_k: float
    p_k: float
    outcome: Outcome
    window: tuple


@dataclass
class ProtocolResult:
    records: list
    p_fail_cumulative: list
    total_time: float
    corrected: bool
    # plumbing beyond the record log: final state and delivered payload
    final_state: SectorState = None
    delivered_payload: LogicalPayload = None

    @property
    def p_fail(self):
        return self.p_fail_cumulative[-1] if self.p_fail_cumulative else 1.0


def initialize(spec: ChainSpec, payload: LogicalPayload):
    """Excitation at the sender (site 1), clock at zero."""
    if payload.d != spec.d:
        raise ValueError(
            f"payload dimension {payload.d} does not match chain d={spec.d}"
        )
    spatial = np.zeros(spec.n_sites, dtype=complex)
    spatial[0] = 1.0
    return SectorState(spec=spec, spatial=spatial, elapsed=0.0, payload=payload)


def evolve(state: SectorState, t, propagator_mode):
    """Free evolution for time t: spatial <- F(t) spatial."""
    if t < 0:
        raise ValueError(f"need t >= 0, got {t}")
    basis = sector_basis(state.spec, propagator_mode)
    return SectorState(
        spec=state.spec,
        spatial=basis.evolve(state.spatial, t),
        elapsed=state.elapsed + t,
        payload=state.payload,
        norm_factor=state.norm_factor,
    )


def success_probability(state: SectorState):
    """Probability that the receiver-site measurement finds the excitation."""
    return float(abs(state.spatial[-1]) ** 2)


def excitation_distribution(state: SectorState):
    """Per-site excitation probabilities (sums to one)."""
    return np.abs(state.spatial) ** 2


def _forced_branch(source):
    if isinstance(source, Outcome):
        if source is Outcome.FORCED:
            raise ValueError("forced outcome must be SUCCESS or FAILURE")
        return source is Outcome.SUCCESS
    if isinstance(source, str):
        ch = source.upper()
        if ch not in ("S", "F"):
            raise ValueError(f"forced outcome must be 'S' or 'F', got {source!r}")
        return ch == "S"
    if isinstance(source, bool):
        return source
    return None


def measure(state: SectorState, outcome_source):
    """Receiver-site projective measurement.

    outcome_source is a numpy Generator (sampled branch) or a forced
    outcome ('S'/'F', Outcome, or bool). Zero-probability forced branches
    are rejected.
    """
    p = success_probability(state)
    p = min(max(p, 0.0), 1.0)
    forced = _forced_branch(outcome_source)
    if forced is None:
        if not isinstance(outcome_source, np.random.Generator):
            raise TypeError(f"bad outcome source: {outcome_source!r}")
        success = bool(outcome_source.random() < p)
    else:
        success = forced
        if success and p == 0.0:
            raise ValueError("forced success on a zero-probability branch")
        if not success and p == 1.0:
            raise ValueError("forced failure on a zero-probability branch")
    if success:
        spatial = np.zeros_like(state.spatial)
        spatial[-1] = 1.0
        new = SectorState(
            spec=state.spec,
            spatial=spatial,
            elapsed=state.elapsed,
            payload=state.payload,
            norm_factor=state.norm_factor * p,
        )
        return Outcome.SUCCESS, new
    spatial = state.spatial.copy()
    spatial[-1] = 0.0
    if p > 0.0:
        spatial /= np.sqrt(1.0 - p)
    new = SectorState(
        spec=state.spec,
        spatial=spatial,
        elapsed=state.elapsed,
        payload=state.payload,
        norm_factor=state.norm_factor * (1.0 - p),
    )
    return Outcome.FAILURE, new


def _receiver_mode_weights(state, mode):
    basis = sector_basis(state.spec, mode)
    return basis.vectors[-1, :] * (basis.vectors.T @ state.spatial), basis


def _parabolic_refine(ts, pvals, i, evaluate):
    """Refine grid peak i through the fitted vertex; keep the better point."""
    t, p = float(ts[i]), float(pvals[i])
    if 0 < i < len(ts) - 1:
        y0, y1, y2 = pvals[i - 1], pvals[i], pvals[i + 1]
        den = y0 - 2.0 * y1 + y2
        if den < 0.0:
            step = ts[1] - ts[0]
            tr = float(ts[i] + 0.5 * step * (y0 - y2) / den)
            if ts[0] <= tr <= ts[-1]:
                pr = float(evaluate(tr))
                if pr > p:
                    return tr, pr
    return t, p


def optimize_series(ts, pvals, criterion, evaluate):
    """Peak search over a sampled series, with parabolic refinement through
    the evaluate callback. Shared by optimize_time and directly usable on
    synthetic series."""
    n = len(ts)
    crit = criterion if isinstance(criterion, PeakCriterion) else PeakCriterion(criterion)
    if crit is PeakCriterion.FIRST_PEAK:
        floor = max(PEAK_FLOOR_ABS, PEAK_FLOOR_REL * float(pvals.max()))
        interior = pvals[1:-1]
        peaks = np.flatnonzero(
            (pvals[:-2] < interior) & (interior >= pvals[2:]) & (interior > floor)
        )
        if peaks.size == 0:
            return OptimizeResult(
                t=float(ts[-1]), p=float(pvals[-1]), at_endpoint=True
            )
        t, p = _parabolic_refine(ts, pvals, int(peaks[0]) + 1, evaluate)
        return OptimizeResult(t=t, p=p, at_endpoint=False)
    gmax = float(pvals.max())
    i = int(np.flatnonzero(pvals >= gmax - GLOBAL_TIE_TOL)[0])
    t, p = _parabolic_refine(ts, pvals, i, evaluate)
    return OptimizeResult(t=t, p=p, at_endpoint=(i == n - 1))


def optimize_time(state, window, grid_step, criterion, mode):
    """Search the evolution-time window (t_min, t_max] for a success peak.

    FirstPeak takes the first grid-local maximum above the noise floor;
    GlobalMax takes the window-wide maximum (earliest among ties). Both
    refine the grid point by parabolic interpolation. A window with no
    interior peak reports the endpoint with at_endpoint set.
    """
    t_min, t_max = window
    if not t_min < t_max:
        raise ValueError(f"bad window {window}")
    if grid_step <= 0:
        raise ValueError(f"need grid_step > 0, got {grid_step}")
    n = int(np.floor((t_max - t_min) / grid_step + 1e-9))
    if n < 3:
        raise ValueError("window shorter than three grid steps")
    ts = t_min + grid_step * np.arange(1, n + 1)
    weights, basis = _receiver_mode_weights(state, mode)
    pvals = probability_series(weights, basis.freqs, ts)

    def evaluate(t):
        return probability_series(weights, basis.freqs, np.array([t]))[0]

    return optimize_series(ts, pvals, criterion, evaluate)


def schedule_regular(t1, k):
    """Evolution time of iteration k under the fixed schedule (2k-1) t1."""
    if k < 1:
        raise ValueError(f"need k >= 1, got {k}")
    return (2 * k - 1) * t1


def phase_correction(payload: LogicalPayload, b_field, total_time):
    """Undo the field phase: a_mu <- a_mu exp(+i mu B T)."""
    mu = np.arange(1, payload.d)
    return LogicalPayload(
        d=payload.d, a=payload.a * np.exp(1j * mu * b_field * total_time)
    )


class OutcomeSource:
    """Per-iteration outcome driver: a forced-outcome script ('S'/'F', one
    character per iteration) with a seeded sampler for iterations past the
    script's end."""

    def __init__(self, script="", rng=None, seed=0):
        script = (script or "").upper()
        if any(ch not in "SF" for ch in script):
            raise ValueError(f"bad outcome script {script!r}")
        self.script = script
        self.rng = rng if rng is not None else np.random.default_rng(seed)

    def pick(self, k):
        """Returns ('S'/'F', True) when scripted, (rng, False) otherwise."""
        if k <= len(self.script):
            return self.script[k - 1], True
        return self.rng, False


def _as_outcome_source(outcome_source):
    if outcome_source is None:
        return OutcomeSource()
    if isinstance(outcome_source, OutcomeSource):
        return outcome_source
    if isinstance(outcome_source, (int, np.integer)):
        return OutcomeSource(seed=int(outcome_source))
    if isinstance(outcome_source, np.random.Generator):
        return OutcomeSource(rng=outcome_source)
    if isinstance(outcome_source, str):
        return OutcomeSource(script=outcome_source)
    raise TypeError(f"bad outcome source: {outcome_source!r}")


def run_iterative_protocol(
    spec: ChainSpec,
    payload: LogicalPayload,
    strategy="optimized",
    max_iter=10,
    mode=PropagatorMode.EXACT_DIAGONALIZATION,
    outcome_source=None,
    grid_step=DEFAULT_GRID_STEP,
    later_window_jt=LATER_WINDOW_JT,
):
    """Run up to max_iter evolve-measure cycles.

    strategy 'optimized': iteration 1 searches Jt in (0, 2N] for the first
    success peak, later iterations take the global maximum over
    Jt in (0, later_window_jt]. strategy 'regular': later iterations wait
    the fixed (2k-1) t1 instead of searching. Delivery applies the field
    phase correction to the payload.
    """
    if max_iter < 1:
        raise ValueError(f"need max_iter >= 1, got {max_iter}")
    if strategy not in ("optimized", "regular"):
        raise ValueError(f"unknown strategy {strategy!r}")
    mode = as_mode(mode)
    source = _as_outcome_source(outcome_source)
    state = initialize(spec, payload)
    j = spec.j
    records = []
    p_fail_cumulative = []
    fail_product = 1.0
    total_time = 0.0
    corrected = False
    delivered = None
    t1 = None
    for k in range(1, max_iter + 1):
        if k == 1:
            window = (0.0, 2.0 * spec.n_sites / j)
            t_k, p_est, _ = optimize_time(
                state, window, grid_step / j, PeakCriterion.FIRST_PEAK, mode
            )
            t1 = t_k
        elif strategy == "optimized":
            window = (0.0, later_window_jt / j)
            t_k, p_est, _ = optimize_time(
                state, window, grid_step / j, PeakCriterion.GLOBAL_MAX, mode
            )
        else:
            t_k = schedule_regular(t1, k)
            window = (t_k, t_k)
        state = evolve(state, t_k, mode)
        p_k = success_probability(state)
        forced_char, scripted = source.pick(k)
        branch, state = measure(state, forced_char if scripted else source.rng)
        records.append(
            IterationRecord(
                k=k,
                t_k=t_k,
                p_k=p_k,
                outcome=Outcome.FORCED if scripted else branch,
                window=window,
            )
        )
        fail_product *= 1.0 - p_k
        p_fail_cumulative.append(fail_product)
        total_time += t_k
        if branch is Outcome.SUCCESS:
            arrived = LogicalPayload(
                d=payload.d,
                a=payload.a
                * np.exp(
                    -1j * np.arange(1, payload.d) * spec.b_field * state.elapsed
                ),
            )
            delivered = phase_correction(arrived, spec.b_field, state.elapsed)
            corrected = True
            break
    return ProtocolResult(
        records=records,
        p_fail_cumulative=p_fail_cumulative,
        total_time=total_time,
        corrected=corrected,
        final_state=state,
        delivered_payload=delivered,
    )
