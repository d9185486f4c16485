"""Minimizers for :class:`~pdqubo.qubo.QuboProblem` energies.

All stochastic solvers run many independent chains (samples). Chain ``c``
draws every random number from its own generator seeded by ``(seed, c)``,
so the first ``s`` samples of a run with ``num_samples = S >= s`` are
exactly the samples of a run with ``num_samples = s``. Chains are
advanced together as numpy arrays; arithmetic is row-independent, so
block partitioning never changes results.

Ties between equal-energy solutions resolve to the lexicographically
smallest bit vector (bit 0 most significant).
"""

from __future__ import annotations

import enum
import itertools
import math
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, ProtocolError, SolverError, TransportError
from .qubo import QuboProblem, auto_penalty_weight, energy, from_triplets, to_triplets

MAX_EXHAUSTIVE_SIZE = 24
_CALIBRATION_STREAM = 1 << 40


class SolverKind(str, enum.Enum):
    EXHAUSTIVE = "exhaustive"
    SA = "sa"
    TABU = "tabu"
    SGD = "sgd"
    EXTERNAL = "external-stub"


@dataclass(frozen=True)
class SolverConfig:
    """Solver selection and budgets. ``None`` budgets scale with problem size.

    SA: ``steps_per_temp`` defaults to ``n``; ``initial_temp`` is estimated
    from 100 random moves; ``final_temp`` defaults to ``1e-3 * initial``.
    Tabu: ``tenure`` defaults to ``ceil(n/10) + 3`` and ``max_iters`` to
    ``max(100, 10 n)``. SGD: ``learning_rate`` defaults to ``1/L`` with
    ``L`` the gradient's Lipschitz bound.
    """

    kind: SolverKind = SolverKind.SA
    seed: int = 0
    num_samples: int = 2000
    initial_temp: float | None = None
    cooling: float = 0.9
    steps_per_temp: int | None = None
    final_temp: float | None = None
    swap_moves: bool = False
    tenure: int | None = None
    max_iters: int | None = None
    init: str = "random"
    learning_rate: float | None = None
    iters: int = 500
    restarts: int = 20
    debug: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", SolverKind(self.kind))
        if not 0.0 < self.cooling < 1.0:
            raise ConfigError(f"cooling must lie in (0, 1), got {self.cooling}")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        for name in ("num_samples", "steps_per_temp", "tenure", "max_iters", "iters", "restarts"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ConfigError(f"{name} must be >= 1, got {value}")
        if self.init not in ("random", "zeros"):
            raise ConfigError(f"init must be 'random' or 'zeros', got {self.init!r}")

    def to_dict(self):
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["kind"] = self.kind.value
        return out


@dataclass(frozen=True, eq=False)
class SolveResult:
    best: np.ndarray
    best_energy: float
    sample_energies: np.ndarray
    sample_bits: np.ndarray | None
    wall_time: float
    evaluations: int
    solver: str
    seed: int | None = None
    info: dict = field(default_factory=dict)

    @property
    def samples(self):
        if self.sample_bits is None:
            return []
        return list(zip(self.sample_energies.tolist(), self.sample_bits))

    @property
    def selected(self) -> list[int]:
        return np.flatnonzero(self.best).tolist()

    def to_dict(self):
        return {
            "solver": self.solver,
            "seed": self.seed,
            "best": self.best.tolist(),
            "best_energy": self.best_energy,
            "wall_time": self.wall_time,
            "evaluations": self.evaluations,
        }


@dataclass(frozen=True)
class StabilityReport:
    num_samples: int
    sample_energies: np.ndarray
    min: float
    mean: float
    variance: float
    histogram: tuple

    def to_dict(self):
        counts, edges = self.histogram
        return {
            "num_samples": self.num_samples,
            "min": self.min,
            "mean": self.mean,
            "variance": self.variance,
            "sample_energies": self.sample_energies.tolist(),
            "histogram": {"counts": counts.tolist(), "edges": edges.tolist()},
        }


# --- shared helpers ----------------------------------------------------------


def derive_seed(seed: int, stream: int) -> int:
    return int(np.random.SeedSequence([seed, stream]).generate_state(1, np.uint64)[0] >> 1)


def _chain_rng(seed, c):
    return np.random.default_rng([seed, c])


def lexicographic_best(bits: np.ndarray, values: np.ndarray) -> int:
    """Index of the minimum value; ties go to the lexicographically smallest row."""
    keys = np.vstack([bits[:, ::-1].T, values]) if bits.shape[1] else values[None, :]
    return int(np.lexsort(keys)[0])


def _finish(problem, bits, start, evaluations, solver, seed, record=True, info=None):
    bits = np.asarray(bits, dtype=np.int8)
    values = np.array([energy(problem, b) for b in bits])
    idx = lexicographic_best(bits, values)
    best = bits[idx].copy()
    best.setflags(write=False)
    return SolveResult(
        best,
        float(values[idx]),
        values,
        bits if record else None,
        time.perf_counter() - start,
        int(evaluations),
        solver,
        seed,
        info or {},
    )


def _initial_states(problem, config, chains, rngs):
    n = problem.size
    x = np.zeros((len(chains), n))
    if config.init == "zeros" and not _uses_swaps(problem, config):
        return x
    for r, rng in enumerate(rngs):
        if _uses_swaps(problem, config):
            x[r, rng.choice(n, size=problem.k, replace=False)] = 1.0
        else:
            x[r] = rng.integers(0, 2, size=n)
    return x


def _uses_swaps(problem, config):
    return problem.k is not None and (problem.hard or config.swap_moves)


def _check_drift(a, offset, x, cur):
    full = np.einsum("si,ij,sj->s", x, a, x) + offset
    drift = np.abs(full - cur)
    tol = 1e-9 * np.maximum(1.0, np.abs(full))
    if np.any(drift > tol):
        raise SolverError(f"incremental energy drifted by {drift.max():.3e}")


# --- exhaustive --------------------------------------------------------------


def _int_to_bits(values, n):
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((values[:, None] >> shifts) & 1).astype(np.int8)


def solve_exhaustive(problem: QuboProblem, config: SolverConfig | None = None) -> SolveResult:
    """Global minimum by enumeration (``n <= 24``).

    Hard-constrained problems enumerate only the ``C(n, k)`` feasible vectors.
    """
    n = problem.size
    if n > MAX_EXHAUSTIVE_SIZE:
        raise SolverError(f"exhaustive search refused for size {n} > {MAX_EXHAUSTIVE_SIZE}")
    start = time.perf_counter()
    a, offset = problem.expanded()
    candidates = []
    best = math.inf
    evaluations = 0

    def consider(bits):
        nonlocal best
        xf = bits.astype(np.float64)
        vals = np.einsum("si,ij,sj->s", xf, a, xf) + offset
        lo = vals.min()
        best = min(best, lo)
        tol = 1e-9 * max(1.0, abs(best))
        candidates.append(bits[vals <= best + tol])

    if problem.hard:
        combos = list(itertools.combinations(range(n), problem.k))
        for lo in range(0, len(combos), 1 << 16):
            chunk = combos[lo:lo + (1 << 16)]
            bits = np.zeros((len(chunk), n), dtype=np.int8)
            if problem.k:
                rows = np.repeat(np.arange(len(chunk)), problem.k)
                bits[rows, np.asarray(chunk).reshape(-1)] = 1
            consider(bits)
            evaluations += len(chunk)
    else:
        total = 1 << n
        step = 1 << 16
        for lo in range(0, total, step):
            ints = np.arange(lo, min(total, lo + step), dtype=np.int64)
            consider(_int_to_bits(ints, n))
            evaluations += ints.size
    pool = np.concatenate(candidates)
    xf = pool.astype(np.float64)
    vals = np.einsum("si,ij,sj->s", xf, a, xf) + offset
    tol = 1e-9 * max(1.0, abs(best))
    pool = pool[vals <= best + tol]
    result = _finish(problem, pool, start, evaluations, SolverKind.EXHAUSTIVE.value, None, record=False)
    return replace(
        result,
        sample_energies=np.array([result.best_energy]),
        sample_bits=None,
    )


# --- simulated annealing -----------------------------------------------------


def _sa_delta_single(a, x, h, idx, rows):
    delta = 1.0 - 2.0 * x[rows, idx]
    return delta, 2.0 * delta * h[rows, idx] + a[idx, idx]


def _sa_delta_swap(a, h, i, j, rows):
    return (-2.0 * h[rows, i] + a[i, i]) + (2.0 * h[rows, j] + a[j, j]) - 2.0 * a[i, j]


def estimate_initial_temperature(problem: QuboProblem, config: SolverConfig, moves: int = 100) -> float:
    """Standard deviation of the energy change over a random walk of ``moves`` moves."""
    a, _ = problem.expanded()
    n = problem.size
    rng = _chain_rng(config.seed, _CALIBRATION_STREAM)
    x = _initial_states(problem, replace(config, init="random"), [0], [rng])
    h = x @ a
    rows = np.zeros(1, dtype=np.int64)
    deltas = []
    swaps = _uses_swaps(problem, config)
    if swaps and problem.k in (0, n):
        return 1.0
    for _ in range(moves):
        if swaps:
            i = rng.choice(np.flatnonzero(x[0]))
            j = rng.choice(np.flatnonzero(x[0] == 0))
            d = _sa_delta_swap(a, h, i, j, rows)[0]
            x[0, i], x[0, j] = 0.0, 1.0
            h += a[j] - a[i]
        else:
            i = int(rng.integers(n))
            sign, d = _sa_delta_single(a, x, h, i, rows)
            x[0, i] += sign[0]
            h += sign[0] * a[i]
            d = d[0]
        deltas.append(d)
    t0 = float(np.std(deltas))
    return t0 if t0 > 0 else 1.0


def temperature_schedule(t0: float, final: float, cooling: float) -> np.ndarray:
    """Geometric levels from ``t0`` down to the first level at or below ``final``."""
    levels = max(1, math.ceil(math.log(final / t0) / math.log(cooling)) + 1)
    return t0 * cooling ** np.arange(levels)


def _anneal_block(problem, config, chains, schedule, steps):
    a, offset = problem.expanded()
    n = problem.size
    s = len(chains)
    rngs = [_chain_rng(config.seed, c) for c in chains]
    x = _initial_states(problem, config, chains, rngs)
    total = len(schedule) * steps
    swaps = _uses_swaps(problem, config)
    if swaps:
        k = problem.k
        u_out = np.stack([rng.random(total) for rng in rngs])
        u_in = np.stack([rng.random(total) for rng in rngs])
        ones = np.stack([np.flatnonzero(row) for row in x]) if k else np.zeros((s, 0), int)
        zeros = np.stack([np.flatnonzero(row == 0) for row in x]) if k < n else np.zeros((s, 0), int)
    else:
        flips = np.stack([rng.integers(0, n, size=total) for rng in rngs])
    accept_u = np.stack([rng.random(total) for rng in rngs])

    h = x @ a
    cur = np.einsum("si,si->s", x, h) + offset
    best_x = x.copy()
    best_e = cur.copy()
    rows = np.arange(s)
    movable = not swaps or 0 < problem.k < n
    if movable:
        for t in range(total):
            temp = schedule[t // steps]
            if swaps:
                pi = (u_out[:, t] * k).astype(np.int64)
                pj = (u_in[:, t] * (n - k)).astype(np.int64)
                i = ones[rows, pi]
                j = zeros[rows, pj]
                d = _sa_delta_swap(a, h, i, j, rows)
            else:
                i = flips[:, t]
                sign, d = _sa_delta_single(a, x, h, i, rows)
            with np.errstate(over="ignore"):
                acc = (d <= 0) | (accept_u[:, t] < np.exp(-d / temp))
            if acc.any():
                r = rows[acc]
                if swaps:
                    ii, jj = i[acc], j[acc]
                    x[r, ii] = 0.0
                    x[r, jj] = 1.0
                    h[r] += a[jj] - a[ii]
                    ones[r, pi[acc]] = jj
                    zeros[r, pj[acc]] = ii
                else:
                    ii = i[acc]
                    x[r, ii] += sign[acc]
                    h[r] += sign[acc, None] * a[ii]
                cur[r] += d[acc]
                better = cur < best_e
                if better.any():
                    best_e[better] = cur[better]
                    best_x[better] = x[better]
            if config.debug:
                _check_drift(a, offset, x, cur)
    return best_x, total * s


def _block_size(per_chain_values):
    return max(1, min(4096, 4_000_000 // max(1, per_chain_values)))


def solve_sa(problem: QuboProblem, config: SolverConfig = SolverConfig()) -> SolveResult:
    """Single-bit-flip Metropolis annealing with geometric cooling.

    With a hard constraint (or ``swap_moves``) the move is a swap of one
    selected and one unselected bit, which preserves cardinality.
    """
    start = time.perf_counter()
    n = problem.size
    t0 = config.initial_temp or estimate_initial_temperature(problem, config)
    final = config.final_temp or 1e-3 * t0
    if final >= t0:
        raise ConfigError("final_temp must be below initial_temp")
    schedule = temperature_schedule(t0, final, config.cooling)
    steps = config.steps_per_temp or max(1, n)
    total = len(schedule) * steps
    block = _block_size(total * 3)
    bits, evals = [], 0
    for lo in range(0, config.num_samples, block):
        chains = range(lo, min(config.num_samples, lo + block))
        bx, ev = _anneal_block(problem, config, chains, schedule, steps)
        bits.append(bx)
        evals += ev
    info = {"initial_temp": t0, "final_temp": final, "levels": len(schedule), "steps_per_temp": steps}
    return _finish(problem, np.concatenate(bits), start, evals, SolverKind.SA.value, config.seed, info=info)


# --- tabu search -------------------------------------------------------------


def _tabu_block(problem, config, chains, tenure, max_iters):
    a, offset = problem.expanded()
    n = problem.size
    s = len(chains)
    rngs = [_chain_rng(config.seed, c) for c in chains]
    x = _initial_states(problem, config, chains, rngs)
    swaps = _uses_swaps(problem, config)
    h = x @ a
    cur = np.einsum("si,si->s", x, h) + offset
    best_x = x.copy()
    best_e = cur.copy()
    tabu_until = np.zeros((s, n), dtype=np.int64)
    active = np.ones(s, dtype=bool)
    diag = np.diag(a)
    evals = 0
    if swaps and problem.k in (0, n):
        return best_x, 0
    for it in range(max_iters):
        rows = np.flatnonzero(active)
        if rows.size == 0:
            break
        xr, hr = x[rows], h[rows]
        free = tabu_until[rows] <= it
        if swaps:
            out_gain = -2.0 * hr + diag              # bit i: 1 -> 0
            in_gain = 2.0 * hr + diag                # bit j: 0 -> 1
            d = out_gain[:, :, None] + in_gain[:, None, :] - 2.0 * a[None]
            valid = (xr[:, :, None] == 1) & (xr[:, None, :] == 0)
            allowed = free[:, :, None] & free[:, None, :]
            d = np.where(valid, d, np.inf).reshape(rows.size, -1)
            allowed = (allowed.reshape(rows.size, -1)) & np.isfinite(d)
            evals += int(valid.sum())
        else:
            d = 2.0 * (1.0 - 2.0 * xr) * hr + diag
            allowed = free
            evals += rows.size * n
        aspire = (cur[rows, None] + d) < best_e[rows, None]
        allowed = allowed | (aspire & np.isfinite(d))
        stuck = ~allowed.any(axis=1)
        active[rows[stuck]] = False
        go = ~stuck
        if not go.any():
            break
        rows = rows[go]
        dm = np.where(allowed[go], d[go], np.inf)
        move = np.argmin(dm, axis=1)
        dd = dm[np.arange(rows.size), move]
        if swaps:
            i, j = np.divmod(move, n)
            x[rows, i] = 0.0
            x[rows, j] = 1.0
            h[rows] += a[j] - a[i]
            tabu_until[rows, i] = it + tenure + 1
            tabu_until[rows, j] = it + tenure + 1
        else:
            sign = 1.0 - 2.0 * x[rows, move]
            x[rows, move] += sign
            h[rows] += sign[:, None] * a[move]
            tabu_until[rows, move] = it + tenure + 1
        cur[rows] += dd
        better = cur < best_e
        if better.any():
            best_e[better] = cur[better]
            best_x[better] = x[better]
        if config.debug:
            _check_drift(a, offset, x, cur)
    return best_x, evals


def solve_tabu(problem: QuboProblem, config: SolverConfig = SolverConfig(kind="tabu")) -> SolveResult:
    """Steepest-descent tabu search over the 1-flip (or swap) neighborhood.

    The best non-tabu move is always taken, even uphill. A tabu move is
    allowed when it beats the chain's best energy so far. A chain stops
    after ``max_iters`` iterations or when every move is tabu.
    """
    start = time.perf_counter()
    n = problem.size
    tenure = config.tenure or math.ceil(n / 10) + 3
    max_iters = config.max_iters or max(100, 10 * n)
    width = n * n if _uses_swaps(problem, config) else n
    block = _block_size(width * 4)
    bits, evals = [], 0
    for lo in range(0, config.num_samples, block):
        chains = range(lo, min(config.num_samples, lo + block))
        bx, ev = _tabu_block(problem, config, chains, tenure, max_iters)
        bits.append(bx)
        evals += ev
    info = {"tenure": tenure, "max_iters": max_iters}
    return _finish(problem, np.concatenate(bits), start, evals, SolverKind.TABU.value, config.seed, info=info)


# --- projected gradient ------------------------------------------------------


def _relaxed_weight(problem):
    if problem.k is None:
        return 0.0
    if problem.hard:
        return auto_penalty_weight(problem.q)
    return problem.penalty_weight


def relaxed_energy(problem: QuboProblem, x) -> float:
    """``x^T Q x + w (sum(x) - k)^2`` for real ``x``."""
    x = np.asarray(x, dtype=np.float64)
    y = float(x @ problem.coupling() @ x)
    if problem.k is not None:
        y += _relaxed_weight(problem) * (x.sum() - problem.k) ** 2
    return y


def relaxed_gradient(problem: QuboProblem, x) -> np.ndarray:
    """``(Q + Q^T) x + 2 w (sum(x) - k) 1``, row-wise for 2-D input."""
    x = np.asarray(x, dtype=np.float64)
    m = problem.coupling()
    g = x @ (m + m.T)
    if problem.k is not None:
        dev = x.sum(axis=-1, keepdims=True) - problem.k
        g = g + 2.0 * _relaxed_weight(problem) * dev
    return g


def round_relaxed(x: np.ndarray, k: int | None) -> np.ndarray:
    """Top-``k`` coordinates (ties to lower index) or threshold at 0.5."""
    x = np.atleast_2d(x)
    out = np.zeros(x.shape, dtype=np.int8)
    if k is None:
        out[x >= 0.5] = 1
        return out
    idx = np.arange(x.shape[1])
    for r in range(x.shape[0]):
        order = np.lexsort((idx, -x[r]))
        out[r, order[:k]] = 1
    return out


def solve_sgd(problem: QuboProblem, config: SolverConfig = SolverConfig(kind="sgd")) -> SolveResult:
    """Projected gradient descent on the box relaxation, then rounding.

    Each restart starts from a uniform random point in ``[0, 1]^n``.
    """
    start = time.perf_counter()
    n = problem.size
    m = problem.coupling()
    w = _relaxed_weight(problem)
    lr = config.learning_rate
    if lr is None:
        lipschitz = float(np.linalg.norm(m + m.T, 2)) + 2.0 * w * n
        lr = 1.0 / lipschitz if lipschitz > 0 else 1.0
    x = np.stack([_chain_rng(config.seed, c).uniform(0.0, 1.0, n) for c in range(config.restarts)])
    for _ in range(config.iters):
        x = np.clip(x - lr * relaxed_gradient(problem, x), 0.0, 1.0)
    bits = round_relaxed(x, problem.k)
    info = {"learning_rate": lr}
    return _finish(problem, bits, start, config.iters * config.restarts,
                   SolverKind.SGD.value, config.seed, info=info)


# --- external sampler --------------------------------------------------------


@dataclass(frozen=True)
class EndpointConfig:
    """Where to send the triplet payload; ``loopback://`` runs locally via SA."""

    url: str = "loopback://"
    timeout: float = 30.0


def format_response(bits, value: float) -> str:
    return " ".join(str(int(b)) for b in bits) + f"\nenergy={float(value)!r}\n"


def parse_response(text: str, size: int):
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if len(lines) != 2:
        raise ProtocolError(f"expected 2 response lines, got {len(lines)}")
    try:
        bits = np.array([int(tok) for tok in lines[0].split()], dtype=np.int8)
    except ValueError as exc:
        raise ProtocolError(f"bad bit line {lines[0]!r}") from exc
    if bits.size != size:
        raise ProtocolError(f"expected {size} bits, got {bits.size}")
    if not np.isin(bits, (0, 1)).all():
        raise ProtocolError("bits must be 0 or 1")
    if not lines[1].startswith("energy="):
        raise ProtocolError(f"bad energy line {lines[1]!r}")
    try:
        value = float(lines[1].split("=", 1)[1])
    except ValueError as exc:
        raise ProtocolError(f"bad energy line {lines[1]!r}") from exc
    return bits, value


def _loopback(payload: str, config: SolverConfig) -> str:
    result = solve_sa(from_triplets(payload), replace(config, kind=SolverKind.SA))
    return format_response(result.best, result.best_energy)


def external_sampler_submit(
    problem: QuboProblem,
    endpoint: EndpointConfig = EndpointConfig(),
    config: SolverConfig = SolverConfig(kind="external-stub"),
) -> SolveResult:
    """POST the triplet payload to ``endpoint`` and parse the reply.

    ``loopback://`` never leaves the process: the payload is decoded and
    solved with :func:`solve_sa`, exercising the same wire format.
    """
    start = time.perf_counter()
    payload = to_triplets(problem)
    if endpoint.url.startswith("loopback:"):
        reply = _loopback(payload, config)
    else:
        req = urllib.request.Request(
            endpoint.url,
            data=payload.encode("utf-8"),
            headers={"Content-Type": "text/plain"},
            method="POST",
        )
        try:
            with urllib.request.urlopen(req, timeout=endpoint.timeout) as resp:
                reply = resp.read().decode("utf-8")
        except (urllib.error.URLError, OSError) as exc:
            raise TransportError(f"sampler endpoint {endpoint.url} unreachable: {exc}") from exc
    bits, reported = parse_response(reply, problem.size)
    value = energy(problem, bits)
    return SolveResult(
        bits,
        value,
        np.array([value]),
        bits[None, :],
        time.perf_counter() - start,
        config.num_samples,
        SolverKind.EXTERNAL.value,
        config.seed,
        {"endpoint": endpoint.url, "reported_energy": reported},
    )


# --- dispatch and stability --------------------------------------------------


SAMPLING_KINDS = (SolverKind.SA, SolverKind.TABU, SolverKind.SGD)


def solve(problem: QuboProblem, config: SolverConfig) -> SolveResult:
    kind = config.kind
    if kind is SolverKind.EXHAUSTIVE:
        return solve_exhaustive(problem, config)
    if kind is SolverKind.SA:
        return solve_sa(problem, config)
    if kind is SolverKind.TABU:
        return solve_tabu(problem, config)
    if kind is SolverKind.SGD:
        return solve_sgd(problem, config)
    return external_sampler_submit(problem, EndpointConfig(), config)


def sample_stability(
    problem: QuboProblem,
    config: SolverConfig,
    sample_counts,
    repetitions: int = 20,
    bins: int = 20,
) -> list[StabilityReport]:
    """Distribution of the best-of-``s`` energy over repeated solver runs.

    Each repetition runs once with ``max(sample_counts)`` samples under a
    derived seed; best-of-``s`` is the minimum over its first ``s``
    samples, which equals a fresh run with ``num_samples = s``.
    """
    counts = sorted(int(s) for s in sample_counts)
    if not counts or counts[0] < 1:
        raise ConfigError("sample counts must be >= 1")
    if config.kind not in SAMPLING_KINDS:
        raise ConfigError(f"solver {config.kind.value!r} does not draw independent samples")
    top = counts[-1]
    per_rep = []
    for r in range(repetitions):
        cfg = replace(config, seed=derive_seed(config.seed, r), num_samples=top, restarts=top)
        per_rep.append(solve(problem, cfg).sample_energies)
    table = np.stack([np.minimum.accumulate(e[:top]) for e in per_rep])
    reports = []
    for s in counts:
        mins = table[:, s - 1]
        reports.append(
            StabilityReport(
                s,
                mins,
                float(mins.min()),
                float(mins.mean()),
                float(mins.var()),
                np.histogram(mins, bins=bins),
            )
        )
    return reports
