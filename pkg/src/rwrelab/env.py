"""Random environments on Z^d: step distributions, generative families,
lazy seed-deterministic environments, and structural hypothesis checks.

A model describes the i.i.d. law of the transition vector attached to each
lattice site.  An Environment binds a model to a master seed; the vector at
site x is a pure function of (model, seed, x), so an infinite environment
needs no storage and two walks driven by the same Environment automatically
share it.

The structural hypotheses checked here are the ones the simulation relies on:
a uniform drift bound along a distinguished integer direction u_hat, a uniform
exponential moment for the step, a uniform mass bound on one-level-up steps,
and enough richness of the admissible step set (not concentrated on a pair
{0, z}, not contained in a single line).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence, Union

import numpy as np

from .hashing import key64, site_keys, uniforms_array, unit_uniform, TAG_ENV

PROB_TOL = 1e-12      # accepted deviation of sum(probs) from 1 before renormalizing
CHECK_TOL = 1e-9      # slack in hypothesis inequalities against float rounding


class ModelError(ValueError):
    """A structurally invalid step distribution or environment model."""


@dataclass(frozen=True)
class StepDistribution:
    """Finitely supported probability vector on lattice steps.

    steps are distinct integer vectors; probs align with steps, are
    nonnegative, and must sum to 1 within PROB_TOL (then renormalized).
    """

    steps: tuple[tuple[int, ...], ...]
    probs: tuple[float, ...]

    def __init__(self, steps: Iterable[Sequence[int]], probs: Iterable[float]):
        steps_t = tuple(tuple(int(c) for c in s) for s in steps)
        probs_t = tuple(float(p) for p in probs)
        if len(steps_t) == 0:
            raise ModelError("step distribution needs a nonempty support")
        if len(steps_t) != len(probs_t):
            raise ModelError("steps and probs must have equal length")
        if len(set(steps_t)) != len(steps_t):
            raise ModelError(f"duplicate steps in support: {steps_t}")
        dims = {len(s) for s in steps_t}
        if len(dims) != 1:
            raise ModelError("all steps must share one dimension")
        if any(p < 0 for p in probs_t):
            raise ModelError(f"negative probability in {probs_t}")
        total = math.fsum(probs_t)
        if abs(total - 1.0) > PROB_TOL:
            raise ModelError(f"probabilities sum to {total!r}, not 1 within {PROB_TOL}")
        probs_t = tuple(p / total for p in probs_t)
        object.__setattr__(self, "steps", steps_t)
        object.__setattr__(self, "probs", probs_t)

    @property
    def d(self) -> int:
        return len(self.steps[0])

    @cached_property
    def step_array(self) -> np.ndarray:
        a = np.array(self.steps, dtype=np.int64)
        a.flags.writeable = False
        return a

    @cached_property
    def prob_array(self) -> np.ndarray:
        a = np.array(self.probs, dtype=np.float64)
        a.flags.writeable = False
        return a

    def prob_of(self, step: Sequence[int]) -> float:
        key = tuple(int(c) for c in step)
        for s, p in zip(self.steps, self.probs):
            if s == key:
                return p
        return 0.0


def drift(sd: StepDistribution) -> np.ndarray:
    """Mean step vector sum_z z * p_z."""
    return sd.step_array.T @ sd.prob_array


def exp_moment(sd: StepDistribution, s: float) -> float:
    """sum_z exp(s * |z|) * p_z with |z| Euclidean; s > 0."""
    if s <= 0:
        raise ValueError("s must be positive")
    norms = np.linalg.norm(sd.step_array.astype(np.float64), axis=1)
    return float(np.exp(s * norms) @ sd.prob_array)


# ---------------------------------------------------------------------------
# Families: the per-site law of the step distribution.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Homogeneous:
    """Every site carries the same step distribution (no randomness)."""

    dist: StepDistribution

    @property
    def components(self) -> tuple[StepDistribution, ...]:
        return (self.dist,)

    @property
    def is_random(self) -> bool:
        return False


@dataclass(frozen=True)
class TwoPointMixture:
    """Per site, an independent weight W ~ mixing law on [0,1] blends two
    endpoint distributions: pi_x = W*a + (1-W)*b on the union support."""

    a: StepDistribution
    b: StepDistribution
    mixing: str = "uniform"

    def __post_init__(self):
        if self.a.d != self.b.d:
            raise ModelError("mixture endpoints must share a dimension")
        if self.mixing != "uniform":
            raise ModelError(f"unsupported mixing law {self.mixing!r} (only 'uniform')")

    @property
    def components(self) -> tuple[StepDistribution, ...]:
        return (self.a, self.b)

    @property
    def is_random(self) -> bool:
        return True


@dataclass(frozen=True)
class FiniteMixture:
    """Per site, an independent categorical pick among finitely many
    step distributions with fixed weights."""

    comps: tuple[StepDistribution, ...]
    weights: tuple[float, ...]

    def __init__(self, comps: Iterable[StepDistribution], weights: Iterable[float]):
        comps_t = tuple(comps)
        weights_t = tuple(float(w) for w in weights)
        if len(comps_t) < 1 or len(comps_t) != len(weights_t):
            raise ModelError("components and weights must align and be nonempty")
        if any(w < 0 for w in weights_t):
            raise ModelError("mixture weights must be nonnegative")
        total = math.fsum(weights_t)
        if abs(total - 1.0) > PROB_TOL:
            raise ModelError(f"mixture weights sum to {total!r}, not 1")
        weights_t = tuple(w / total for w in weights_t)
        if len({c.d for c in comps_t}) != 1:
            raise ModelError("all components must share a dimension")
        object.__setattr__(self, "comps", comps_t)
        object.__setattr__(self, "weights", weights_t)

    @property
    def components(self) -> tuple[StepDistribution, ...]:
        return self.comps

    @property
    def is_random(self) -> bool:
        return len(self.comps) > 1


Family = Union[Homogeneous, TwoPointMixture, FiniteMixture]


def _union_support(components: Sequence[StepDistribution]) -> tuple[tuple[int, ...], ...]:
    seen: dict[tuple[int, ...], None] = {}
    for c in components:
        for s in c.steps:
            seen.setdefault(s, None)
    return tuple(seen)


@dataclass(frozen=True)
class EnvironmentModel:
    """An i.i.d. environment law plus its hypothesis parameters.

    u_hat must be a nonzero integer vector so that site levels x . u_hat are
    integers.  delta lower-bounds the drift projection, (s0, m_bound) are the
    exponential-moment parameters, kappa lower-bounds the mass of steps that
    gain exactly one level.
    """

    d: int
    u_hat: tuple[int, ...]
    delta: float
    s0: float
    m_bound: float
    kappa: float
    family: Family
    name: str = ""

    def __post_init__(self):
        if self.d < 2:
            raise ModelError("dimension must be at least 2")
        u = tuple(int(c) for c in self.u_hat)
        if len(u) != self.d or all(c == 0 for c in u):
            raise ModelError("u_hat must be a nonzero integer vector of length d")
        object.__setattr__(self, "u_hat", u)
        if self.delta <= 0 or self.s0 <= 0 or self.m_bound <= 0 or self.kappa <= 0:
            raise ModelError("delta, s0, m_bound, kappa must all be positive")
        for c in self.family.components:
            if c.d != self.d:
                raise ModelError("component dimension differs from model dimension")

    @cached_property
    def u_array(self) -> np.ndarray:
        a = np.array(self.u_hat, dtype=np.int64)
        a.flags.writeable = False
        return a

    @cached_property
    def union_steps(self) -> tuple[tuple[int, ...], ...]:
        return _union_support(self.family.components)

    @cached_property
    def step_array(self) -> np.ndarray:
        a = np.array(self.union_steps, dtype=np.int64)
        a.flags.writeable = False
        return a

    @cached_property
    def step_levels(self) -> np.ndarray:
        a = self.step_array @ self.u_array
        a.flags.writeable = False
        return a

    @cached_property
    def admissible_steps(self) -> tuple[tuple[int, ...], ...]:
        """Steps with positive probability under the averaged site law."""
        m = self.mean_site_probs
        return tuple(s for s, p in zip(self.union_steps, m) if p > 0)

    @cached_property
    def mean_site_probs(self) -> np.ndarray:
        """Averaged (annealed) step probabilities on the union support."""
        comps = self.family.components
        if isinstance(self.family, TwoPointMixture):
            weights = [0.5, 0.5]  # E W = 1/2 for the uniform mixing law
        elif isinstance(self.family, FiniteMixture):
            weights = list(self.family.weights)
        else:
            weights = [1.0]
        index = {s: i for i, s in enumerate(self.union_steps)}
        out = np.zeros(len(self.union_steps))
        for w, c in zip(weights, comps):
            for s, p in zip(c.steps, c.probs):
                out[index[s]] += w * p
        return out

    @cached_property
    def _component_prob_rows(self) -> np.ndarray:
        """(n_components, m) probabilities on the union support."""
        index = {s: i for i, s in enumerate(self.union_steps)}
        rows = np.zeros((len(self.family.components), len(self.union_steps)))
        for i, c in enumerate(self.family.components):
            for s, p in zip(c.steps, c.probs):
                rows[i, index[s]] = p
        return rows

    @cached_property
    def max_level_gain(self) -> int:
        return int(np.max(np.abs(self.step_levels)))

    def site_probs(self, env_seeds: np.ndarray | int, coords: np.ndarray) -> np.ndarray:
        """Vectorized per-site probabilities on the union support.

        env_seeds: scalar or (B,) uint64; coords: (B, d).  Returns (B, m).
        """
        coords = np.atleast_2d(np.asarray(coords, dtype=np.int64))
        B = coords.shape[0]
        rows = self._component_prob_rows
        if isinstance(self.family, Homogeneous):
            return np.broadcast_to(rows[0], (B, rows.shape[1]))
        u = uniforms_array(site_keys(env_seeds, coords))
        if isinstance(self.family, TwoPointMixture):
            # rows[1] + u * (rows[0] - rows[1]): the expression the stepping
            # kernel evaluates, kept identical for bitwise agreement.
            return rows[1] + u[:, None] * (rows[0] - rows[1])
        cdf = np.cumsum(self.family.weights)
        idx = np.minimum(np.searchsorted(cdf, u, side="left"), len(cdf) - 1)
        return rows[idx]

    def site_mixing_weight(self, env_seed: int, x: Sequence[int]) -> float:
        """The latent uniform variable of site x (mixtures only)."""
        if isinstance(self.family, Homogeneous):
            raise ModelError("homogeneous family has no mixing weight")
        key = key64(env_seed, TAG_ENV, *[int(c) for c in x])
        return unit_uniform(key)


@dataclass(frozen=True)
class Environment:
    """One realized environment: a model bound to a master seed.

    site_distribution is a pure function of (model, master_seed, x);
    immutable and safe to share across parallel workers.
    """

    model: EnvironmentModel
    master_seed: int

    def site_distribution(self, x: Sequence[int]) -> StepDistribution:
        coords = np.asarray([list(x)], dtype=np.int64)
        probs = self.model.site_probs(np.uint64(self.master_seed & (2**64 - 1)), coords)[0]
        keep = probs > 0
        steps = [s for s, k in zip(self.model.union_steps, keep) if k]
        return StepDistribution(steps, probs[keep])

    def site_probs(self, coords: np.ndarray) -> np.ndarray:
        return self.model.site_probs(np.uint64(self.master_seed & (2**64 - 1)), coords)


# ---------------------------------------------------------------------------
# Hypothesis checking
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HypothesisReport:
    pass_n: bool
    pass_m: bool
    pass_r: bool
    witnesses: tuple[str, ...]
    admissible_steps: tuple[tuple[int, ...], ...]

    @property
    def all_pass(self) -> bool:
        return self.pass_n and self.pass_m and self.pass_r

    def summary(self) -> dict:
        return {
            "pass_N": self.pass_n,
            "pass_M": self.pass_m,
            "pass_R": self.pass_r,
            "witnesses": list(self.witnesses),
            "admissible_steps": [list(s) for s in self.admissible_steps],
        }


def check_hypotheses(model: EnvironmentModel) -> HypothesisReport:
    """Check the drift, moment, and regularity hypotheses component-wise.

    Mixtures are convex combinations of their components, so component-wise
    bounds extend to every realized site.  Inequalities carry a CHECK_TOL
    slack purely against float rounding of exactly-attained bounds.
    """
    u = model.u_array.astype(np.float64)
    witnesses: list[str] = []

    pass_n = True
    for i, c in enumerate(model.family.components):
        proj = float(drift(c) @ u)
        if proj < model.delta - CHECK_TOL:
            pass_n = False
            witnesses.append(f"N: component {i} has drift.u_hat={proj:.6g} < delta={model.delta}")

    pass_m = True
    bound = math.exp(model.s0 * model.m_bound)
    for i, c in enumerate(model.family.components):
        val = exp_moment(c, model.s0)
        if val > bound * (1 + CHECK_TOL):
            pass_m = False
            witnesses.append(f"M: component {i} has exp moment {val:.6g} > e^(s0*M)={bound:.6g}")

    pass_r = True
    for i, c in enumerate(model.family.components):
        mass = sum(p for s, p in zip(c.steps, c.probs) if int(np.dot(s, model.u_hat)) == 1)
        if mass < model.kappa - CHECK_TOL:
            pass_r = False
            witnesses.append(f"R: component {i} has one-level-up mass {mass:.6g} < kappa={model.kappa}")

    # Some component must not be concentrated on a pair {0, z}: there is a
    # support step z with p(0) + p(z) < 1.
    crowded = True
    for c in model.family.components:
        p0 = c.prob_of([0] * model.d)
        if any(p0 + p < 1 - CHECK_TOL for p in c.probs):
            crowded = False
            break
    if crowded:
        pass_r = False
        witnesses.append("R: every component is concentrated on {0, z} for a single step z")

    admissible = model.admissible_steps
    j = np.array([s for s in admissible if any(s)], dtype=np.float64)
    rank = 0 if j.size == 0 else int(np.linalg.matrix_rank(j))
    if rank < 2:
        pass_r = False
        witnesses.append(f"R: admissible steps {admissible} lie on a single line through 0")

    return HypothesisReport(pass_n, pass_m, pass_r, tuple(witnesses), admissible)


# ---------------------------------------------------------------------------
# Built-in models and model files
# ---------------------------------------------------------------------------


def benchmark_a() -> EnvironmentModel:
    """Default 2-d benchmark: uniform blend of two drifting kernels with
    genuine backtracking, so regeneration detection is nontrivial."""
    a = StepDistribution([(1, 0), (-1, 0), (0, 1), (0, -1)], [0.5, 0.1, 0.2, 0.2])
    b = StepDistribution([(1, 0), (-1, 0), (0, 1), (0, -1)], [0.3, 0.1, 0.4, 0.2])
    return EnvironmentModel(
        d=2, u_hat=(1, 0), delta=0.2, s0=1.0, m_bound=1.0, kappa=0.3,
        family=TwoPointMixture(a, b), name="benchmark-A",
    )


def e1e2_half_half() -> EnvironmentModel:
    """Closed-form model: fair step to e1 or e2, levels along (1,1) increase
    by one deterministically, so every step is a regeneration."""
    p = StepDistribution([(1, 0), (0, 1)], [0.5, 0.5])
    return EnvironmentModel(
        d=2, u_hat=(1, 1), delta=1.0, s0=1.0, m_bound=1.0, kappa=1.0,
        family=Homogeneous(p), name="e1e2-half-half",
    )


def deterministic_e1() -> EnvironmentModel:
    """Degenerate single-step model; fails the richness hypothesis but is
    useful as a trivial oracle (run with force=True)."""
    p = StepDistribution([(1, 0)], [1.0])
    return EnvironmentModel(
        d=2, u_hat=(1, 0), delta=1.0, s0=1.0, m_bound=1.0, kappa=1.0,
        family=Homogeneous(p), name="deterministic-e1",
    )


def micro_model() -> EnvironmentModel:
    """Tiny mixture whose every step gains one level: the first common
    regeneration of two walks happens after a single step, so transition
    probabilities of the difference chain are exactly enumerable."""
    a = StepDistribution([(1, 0), (1, 1)], [0.6, 0.4])
    b = StepDistribution([(1, 0), (1, 1), (1, -1)], [0.3, 0.3, 0.4])
    return EnvironmentModel(
        d=2, u_hat=(1, 0), delta=1.0, s0=1.0, m_bound=math.sqrt(2.0), kappa=1.0,
        family=TwoPointMixture(a, b), name="micro",
    )


BUILTIN_MODELS = {
    "benchmark-A": benchmark_a,
    "e1e2-half-half": e1e2_half_half,
    "deterministic-e1": deterministic_e1,
    "micro": micro_model,
}


def _parse_step_dist(node: dict, where: str) -> StepDistribution:
    if not isinstance(node, dict) or "steps" not in node or "probs" not in node:
        raise ModelError(f"{where}: expected a mapping with keys 'steps' and 'probs'")
    try:
        return StepDistribution(node["steps"], node["probs"])
    except ModelError as e:
        raise ModelError(f"{where}: {e}") from e


def model_from_dict(doc: dict, name: str = "") -> EnvironmentModel:
    """Build a model from parsed structured text.

    Expected keys: d, u_hat, delta, s0, M, kappa,
    family: {type: homogeneous|two-point-mixture|finite-mixture, ...}.
    Errors cite the offending key.
    """
    if not isinstance(doc, dict):
        raise ModelError("model document must be a mapping")
    for key in ("d", "u_hat", "delta", "s0", "M", "kappa", "family"):
        if key not in doc:
            raise ModelError(f"missing required model key '{key}'")
    fam = doc["family"]
    if not isinstance(fam, dict) or "type" not in fam:
        raise ModelError("family: expected a mapping with a 'type' key")
    ftype = str(fam["type"]).lower()
    if ftype == "homogeneous":
        family: Family = Homogeneous(_parse_step_dist(fam.get("dist", fam), "family.dist"))
    elif ftype in ("two-point-mixture", "twopointmixture"):
        for key in ("a", "b"):
            if key not in fam:
                raise ModelError(f"family.{key}: missing for two-point-mixture")
        family = TwoPointMixture(
            _parse_step_dist(fam["a"], "family.a"),
            _parse_step_dist(fam["b"], "family.b"),
            str(fam.get("weights-law", fam.get("mixing", "uniform"))),
        )
    elif ftype in ("finite-mixture", "finitemixture"):
        comps = fam.get("components")
        if not isinstance(comps, list) or not comps:
            raise ModelError("family.components: expected a nonempty list")
        weights = fam.get("weights")
        if weights is None:
            raise ModelError("family.weights: missing for finite-mixture")
        family = FiniteMixture(
            [_parse_step_dist(c, f"family.components[{i}]") for i, c in enumerate(comps)],
            weights,
        )
    else:
        raise ModelError(f"family.type: unknown family {fam['type']!r}")
    try:
        return EnvironmentModel(
            d=int(doc["d"]),
            u_hat=tuple(int(c) for c in doc["u_hat"]),
            delta=float(doc["delta"]),
            s0=float(doc["s0"]),
            m_bound=float(doc["M"]),
            kappa=float(doc["kappa"]),
            family=family,
            name=name or str(doc.get("name", "")),
        )
    except (TypeError, ValueError) as e:
        raise ModelError(f"invalid model field: {e}") from e


def load_model(path_or_name: str) -> EnvironmentModel:
    """Resolve a built-in model name or load a YAML model file."""
    if path_or_name in BUILTIN_MODELS:
        return BUILTIN_MODELS[path_or_name]()
    import yaml

    try:
        with open(path_or_name) as fh:
            doc = yaml.safe_load(fh)
    except OSError as e:
        raise ModelError(
            f"{path_or_name}: not a built-in model {sorted(BUILTIN_MODELS)} "
            f"and not a readable file ({e})"
        ) from e
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        loc = f" at line {mark.line + 1}" if mark is not None else ""
        raise ModelError(f"{path_or_name}: YAML parse error{loc}: {e}") from e
    try:
        return model_from_dict(doc, name=path_or_name)
    except ModelError as e:
        raise ModelError(f"{path_or_name}: {e}") from e


def model_to_dict(model: EnvironmentModel) -> dict:
    """Serialize a model to the structured-text schema (round-trips load)."""
    fam = model.family
    if isinstance(fam, Homogeneous):
        fnode = {"type": "homogeneous",
                 "dist": {"steps": [list(s) for s in fam.dist.steps], "probs": list(fam.dist.probs)}}
    elif isinstance(fam, TwoPointMixture):
        fnode = {"type": "two-point-mixture",
                 "a": {"steps": [list(s) for s in fam.a.steps], "probs": list(fam.a.probs)},
                 "b": {"steps": [list(s) for s in fam.b.steps], "probs": list(fam.b.probs)},
                 "weights-law": fam.mixing}
    else:
        fnode = {"type": "finite-mixture",
                 "components": [{"steps": [list(s) for s in c.steps], "probs": list(c.probs)}
                                for c in fam.comps],
                 "weights": list(fam.weights)}
    return {
        "name": model.name, "d": model.d, "u_hat": list(model.u_hat),
        "delta": model.delta, "s0": model.s0, "M": model.m_bound,
        "kappa": model.kappa, "family": fnode,
    }
