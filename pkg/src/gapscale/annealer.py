"""Classical simulated annealing of the Ising ladder (Gamma = 0).

Single-spin-flip Metropolis: one sweep is 2L proposals at uniformly random
sites, accepted with probability min(1, exp(-dE/T)).  Random numbers come
from Philox counter-based generators keyed by (seed, replica): one stream for
the start configuration and proposed sites, an independent (jumped) stream
for the acceptance tests.  Each stream yields exactly 2L doubles per sweep, so
sweep s always reads the same block and results depend neither on chunking
nor on how replicas are distributed over workers.
"""
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _core
from .analysis import fit_gap_scaling
from .models import LadderParams, classical_ground_energy, ladder_energy, unsatisfied_k_terms

CHUNK_SWEEPS = 512


@dataclass(frozen=True)
class AnnealSchedule:
    T_initial: float
    T_final: float
    n_steps: int
    shape: str = "geometric"

    def __post_init__(self):
        if not self.T_initial > self.T_final > 0:
            raise ValueError("schedule needs T_initial > T_final > 0")
        if self.n_steps < 1:
            raise ValueError("n_steps must be at least 1")
        if self.shape not in ("geometric", "linear"):
            raise ValueError(f"unknown schedule shape {self.shape!r}")

    def temperatures(self):
        if self.n_steps == 1:
            return np.array([self.T_final])
        if self.shape == "geometric":
            return np.geomspace(self.T_initial, self.T_final, self.n_steps)
        return np.linspace(self.T_initial, self.T_final, self.n_steps)


# Frozen default: tuned once at K=5, U=1 (100% success for L <= 32); runs stop at
# first passage, so the long tail only costs time for the rare slow replica.
DEFAULT_SCHEDULE = AnnealSchedule(3.0, 0.05, 1_000_000, "geometric")


@dataclass
class AnnealOutcome:
    first_passage_sweep: int | None
    final_energy: float
    ground_energy: float
    seed: int
    replica: int
    sweeps_done: int
    trajectory: list = field(default_factory=list, repr=False)  # (sweep, energy, defects)

    @property
    def reached(self):
        return self.first_passage_sweep is not None


def replica_rng(seed, replica):
    """(site stream, acceptance stream) for one replica."""
    bg = np.random.Philox(key=[int(seed) & (2**64 - 1), int(replica)])
    return np.random.Generator(bg), np.random.Generator(bg.jumped())


def _draw(site_rng, acc_rng, n_sweeps, per):
    sites = np.minimum((site_rng.random(n_sweeps * per) * per).astype(np.int64), per - 1)
    return sites, acc_rng.random(n_sweeps * per)


def _bits_to_spins(state, L):
    return np.array([1 if (state >> i) & 1 else -1 for i in range(2 * L)], dtype=np.int8)


def _spins_to_bits(spins):
    return int(sum(1 << i for i, s in enumerate(spins) if s > 0))


def defect_count(spins, L):
    """Unsatisfied order-K terms beyond the one per square every configuration must pay."""
    return int(unsatisfied_k_terms([_spins_to_bits(spins)], L)[0]) - L


def anneal(p, schedule, seed, replica=0, initial=None, stop_at_ground=True,
           ground_energy=None, check_every=CHUNK_SWEEPS):
    """Metropolis annealing run; first passage is the first sweep at the exact ground energy.

    `initial` is a bit-encoded configuration; by default the start is drawn at
    infinite temperature from the replica stream.
    """
    if p.Gamma != 0.0:
        raise ValueError("annealing runs on the classical ladder (Gamma == 0)")
    if p.L > 4096:
        raise ValueError("L above 4096 not supported")
    L = p.L
    if ground_energy is None:
        ground_energy = classical_ground_energy(p, max_cycles=0).energy
    tol = 1e-9 * max(1.0, abs(ground_energy))
    site_rng, acc_rng = replica_rng(seed, replica)
    if initial is None:
        spins = np.where(site_rng.random(2 * L) < 0.5, 1, -1).astype(np.int8)
    else:
        spins = _bits_to_spins(int(initial), L)
    energy = ladder_energy(_spins_to_bits(spins), p)
    trajectory = [(0, energy, defect_count(spins, L))]
    if energy <= ground_energy + tol:
        return AnnealOutcome(0, energy, ground_energy, seed, replica, 0, trajectory)

    betas = 1.0 / schedule.temperatures()
    per = 2 * L
    first = None
    done = 0
    step = max(1, int(check_every))
    kern = _core.kernels
    while done < betas.shape[0]:
        block = betas[done: done + step]
        n = block.shape[0]
        sites, uniforms = _draw(site_rng, acc_rng, n, per)
        energy, hit, ran = kern.metropolis_sweeps(spins, L, p.K, p.U, sites, uniforms,
                                                  np.ascontiguousarray(block), energy,
                                                  ground_energy, tol, bool(stop_at_ground))
        if first is None and hit >= 0:
            first = done + int(hit)
        done += int(ran)
        exact = ladder_energy(_spins_to_bits(spins), p)
        if abs(exact - energy) > 1e-9 * max(1.0, abs(exact)):
            raise AssertionError(f"energy bookkeeping drift: {energy} vs {exact}")
        energy = exact
        trajectory.append((done, energy, defect_count(spins, L)))
        if stop_at_ground and first is not None:
            break
    return AnnealOutcome(first, energy, ground_energy, seed, replica, done, trajectory)


# -- scaling study ----------------------------------------------------------

@dataclass(frozen=True)
class ScalingRow:
    L: int
    n_runs: int
    success: float
    median: float
    q25: float
    q75: float
    flagged: bool


@dataclass
class ScalingStudy:
    rows: list
    exponent: float
    exponent_err: float
    amplitude: float
    runs: list = field(default_factory=list, repr=False)

    def fitted_sizes(self):
        return [r.L for r in self.rows if not r.flagged]


def _run_one(args):
    K, U, L, schedule, seed, replica, e0 = args
    out = anneal(LadderParams(L, K, U, 0.0), schedule, seed, replica, ground_energy=e0)
    return (seed, replica, L, K, U, out.first_passage_sweep, out.final_energy)


def _passage_stats(times, n):
    """Quantiles with failed runs counted as +inf (so the median is defined below 50% failure)."""
    t = np.full(n, np.inf)
    t[: len(times)] = np.sort(times)
    return np.quantile(t, [0.25, 0.5, 0.75], method="inverted_cdf")


def scaling_study(K, U, Ls, schedule, n_seeds, seed=0, jobs=1, n_boot=1000, min_success=0.5):
    """Median/quartiles of first-passage sweeps per L and a power-law fit of the median.

    `schedule` is an AnnealSchedule or a callable L -> AnnealSchedule.  Sizes with
    success below `min_success` are flagged and excluded from the fit; the
    exponent error is the standard deviation over `n_boot` bootstrap resamples
    of the replicas.
    """
    sched = schedule if callable(schedule) else (lambda L: schedule)
    tasks = []
    for L in sorted(Ls):
        e0 = classical_ground_energy(LadderParams(L, K, U, 0.0), max_cycles=0).energy
        tasks.extend((K, U, L, sched(L), seed, r, e0) for r in range(n_seeds))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(_run_one, tasks, chunksize=8))
    else:
        runs = [_run_one(t) for t in tasks]

    rows, samples = [], {}
    for L in sorted(Ls):
        fp = [r[5] for r in runs if r[2] == L]
        ok = np.array([t for t in fp if t is not None], dtype=np.float64)
        q25, med, q75 = _passage_stats(ok, len(fp))
        succ = len(ok) / len(fp)
        rows.append(ScalingRow(L, len(fp), succ, float(med), float(q25), float(q75),
                               succ < min_success))
        samples[L] = np.array([np.inf if t is None else t for t in fp], dtype=np.float64)

    good = [r for r in rows if not r.flagged]
    if len(good) < 4:
        return ScalingStudy(rows, math.nan, math.nan, math.nan, runs)
    fit = fit_gap_scaling([r.L for r in good], "power", [r.median for r in good])
    exponent = -fit.params["p"]

    boot_rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xB007]))
    boots = []
    for _ in range(n_boot):
        med = []
        for r in good:
            s = samples[r.L]
            pick = s[boot_rng.integers(0, s.shape[0], s.shape[0])]
            med.append(np.quantile(pick, 0.5, method="inverted_cdf"))
        med = np.array(med)
        if np.all(np.isfinite(med)) and np.all(med > 0):
            b = fit_gap_scaling([r.L for r in good], "power", med)
            boots.append(-b.params["p"])
    err = float(np.std(boots, ddof=1)) if len(boots) > 1 else math.nan
    return ScalingStudy(rows, float(exponent), err, fit.params["A"], runs)


# -- detailed balance -------------------------------------------------------

def sample_fixed_temperature(p, T, n_sweeps, seed, replica=0, thin=1):
    """Visit counts of every configuration, recorded every `thin` sweeps at fixed T.

    Runs the production Metropolis kernel one sweep at a time; meant for tiny
    ladders (2L <= 12) where exact Boltzmann weights are available.
    """
    L = p.L
    if 2 * L > 12:
        raise ValueError("fixed-temperature sampling is meant for 2L <= 12")
    site_rng, acc_rng = replica_rng(seed, replica)
    spins = np.where(site_rng.random(2 * L) < 0.5, 1, -1).astype(np.int8)
    energy = ladder_energy(_spins_to_bits(spins), p)
    per = 2 * L
    sites, uniforms = _draw(site_rng, acc_rng, n_sweeps, per)
    beta = np.array([1.0 / T])
    weights = 1 << np.arange(2 * L)
    counts = np.zeros(1 << (2 * L), dtype=np.int64)
    kern = _core.kernels
    for s in range(n_sweeps):
        sl = slice(s * per, (s + 1) * per)
        energy, _, _ = kern.metropolis_sweeps(spins, L, p.K, p.U, sites[sl], uniforms[sl], beta,
                                              energy, -math.inf, 0.0, False)
        if (s + 1) % thin == 0:
            counts[int(weights[spins > 0].sum())] += 1
    return counts
