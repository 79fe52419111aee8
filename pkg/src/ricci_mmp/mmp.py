"""MMP with scaling on toric surface pairs (X, H).

The engine tracks the class H + tK along the unnormalized flow: at the nef
threshold T the class stops being ample, the curves it kills are contracted,
and the run continues on the contracted surface from the pushed-forward class.
Singular times accumulate as T_i = T_{i-1} + 1/lambda_i.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

from . import toric
from .toric import ToricSurfaceFan, WeilDivisor


class AmbiguousContraction(ValueError):
    pass


class AdjacentContractedRays(ValueError):
    pass


class ResultNotAmple(RuntimeError):
    pass


class Kind(enum.Enum):
    DIVISORIAL = "divisorial"
    MORI_FIBER = "mori_fiber"
    POINT = "point"
    # reserved for dimension >= 3; never constructed here
    FLIP = "flip"


class Terminal(enum.Enum):
    MINIMAL_MODEL = "minimal_model"
    MORI_FIBER_SPACE = "mori_fiber_space"
    POINT = "point"
    NOT_GOOD_DIVISOR = "not_good_divisor"


@dataclass(frozen=True)
class MmpPair:
    fan: ToricSurfaceFan
    H: WeilDivisor

    def __post_init__(self):
        if not toric.is_ample(self.fan, self.H):
            raise toric.NotAmple("H is not ample on the fan")


@dataclass(frozen=True)
class ContractionKind:
    kind: Kind
    rays: tuple[int, ...]


@dataclass(frozen=True)
class MmpStep:
    lambda_: Fraction
    T: Fraction
    kind: ContractionKind
    pair_after: MmpPair | None
    # (H + T0 K)^2 on the surface before surgery
    limit_volume: Fraction


@dataclass(frozen=True)
class MmpFailure:
    lambda_: Fraction
    T: Fraction
    extremal: tuple[int, ...]
    reason: str


@dataclass
class MmpTrace:
    initial: MmpPair
    steps: list[MmpStep] = field(default_factory=list)
    terminal: Terminal | None = None
    failure: MmpFailure | None = None

    @property
    def times(self) -> list[Fraction]:
        return [s.T for s in self.steps]

    @property
    def lambdas(self) -> list[Fraction]:
        return [s.lambda_ for s in self.steps]


def scaling_threshold(pair: MmpPair) -> Fraction:
    """lambda_0 = inf{lambda > 0 : lambda H + K nef} = 1 / nef threshold."""
    T0 = toric.nef_threshold(pair.fan, pair.H)
    if T0 == math.inf:
        return Fraction(0)
    return 1 / T0


def extremal_set(pair: MmpPair) -> tuple[int, ...]:
    T0 = toric.nef_threshold(pair.fan, pair.H)
    if T0 == math.inf:
        return ()
    K = toric.canonical_divisor(pair.fan)
    limit = pair.H + K.scale(T0)
    kv = toric.intersection_vector(pair.fan, K)
    lv = toric.intersection_vector(pair.fan, limit)
    return tuple(i for i in range(len(pair.fan)) if kv[i] < 0 and lv[i] == 0)


def classify_contraction(pair: MmpPair, extremal) -> ContractionKind:
    """Read the contraction type off the self-intersections of the killed curves.

    A K-negative invariant curve has D^2 >= -1.  D^2 >= 1 on a killed curve
    forces the limit class to vanish (Hodge index), which takes precedence.
    """
    extremal = tuple(sorted(extremal))
    if not extremal:
        raise ValueError("empty extremal set")
    prof = toric.self_intersections(pair.fan)
    sq = {prof[i] for i in extremal}
    if any(s >= 1 for s in sq):
        return ContractionKind(Kind.POINT, extremal)
    if sq == {-1}:
        return ContractionKind(Kind.DIVISORIAL, extremal)
    if sq == {0}:
        return ContractionKind(Kind.MORI_FIBER, extremal)
    raise AmbiguousContraction("extremal curves with self-intersections %s" % sorted(sq))


def execute_surgery(pair: MmpPair, kind: ContractionKind) -> MmpPair | Terminal:
    if kind.kind is Kind.MORI_FIBER:
        return Terminal.MORI_FIBER_SPACE
    if kind.kind is Kind.POINT:
        return Terminal.POINT
    if kind.kind is Kind.FLIP:
        raise NotImplementedError("flips do not occur on surfaces")
    n = len(pair.fan)
    rays = kind.rays
    for a in rays:
        for b in rays:
            if a != b and (a - b) % n in (1, n - 1):
                raise AdjacentContractedRays("rays %d and %d are adjacent" % (a, b))
    T0 = toric.nef_threshold(pair.fan, pair.H)
    D = pair.H + toric.canonical_divisor(pair.fan).scale(T0)
    fan = pair.fan
    # contract from the highest index down so lower indices stay valid
    for i in sorted(rays, reverse=True):
        D = toric.pushforward(fan, D, i)
        fan = toric.blow_down(fan, i)
    if not toric.is_ample(fan, D):
        raise ResultNotAmple("pushed-forward class is not ample")
    return MmpPair(fan, D)


def run_mmp_with_scaling(pair: MmpPair) -> MmpTrace:
    trace = MmpTrace(initial=pair)
    T = Fraction(0)
    current = pair
    # each divisorial step removes a ray and P^2 ends every run
    for _ in range(len(pair.fan) - 2):
        lam = scaling_threshold(current)
        if lam == 0:
            trace.terminal = Terminal.MINIMAL_MODEL
            return trace
        T_next = T + 1 / lam
        extremal = extremal_set(current)
        try:
            kind = classify_contraction(current, extremal)
            result = execute_surgery(current, kind)
        except (AmbiguousContraction, AdjacentContractedRays) as exc:
            trace.terminal = Terminal.NOT_GOOD_DIVISOR
            trace.failure = MmpFailure(lam, T_next, extremal, str(exc))
            return trace
        T0 = 1 / lam
        limit = current.H + toric.canonical_divisor(current.fan).scale(T0)
        vol = toric.self_intersection(current.fan, limit)
        after = result if isinstance(result, MmpPair) else None
        trace.steps.append(MmpStep(lam, T_next, kind, after, vol))
        T = T_next
        if after is None:
            trace.terminal = result
            return trace
        current = after
    raise RuntimeError("MMP did not terminate within the ray-count bound")


def is_good_initial_divisor(pair: MmpPair) -> tuple[bool, MmpTrace | MmpStep | MmpFailure]:
    """True iff every divisorial step contracts exactly one ray.

    The witness is the full trace on success, otherwise the offending step
    (or the failure record when the run aborted).
    """
    trace = run_mmp_with_scaling(pair)
    if trace.failure is not None:
        return False, trace.failure
    for s in trace.steps:
        if s.kind.kind is Kind.DIVISORIAL and len(s.kind.rays) != 1:
            return False, s
    return True, trace


def volume_polynomial(pair: MmpPair) -> tuple[Fraction, Fraction, Fraction]:
    """Coefficients (a, b, c) of (H + tK)^2 = a + b t + c t^2."""
    fan, H = pair.fan, pair.H
    K = toric.canonical_divisor(fan)
    hv = toric.intersection_vector(fan, H)
    kv = toric.intersection_vector(fan, K)
    a = sum((h * x for h, x in zip(H.coeffs, hv)), Fraction(0))
    b = 2 * sum((h * x for h, x in zip(H.coeffs, kv)), Fraction(0))
    c = sum((k * x for k, x in zip(K.coeffs, kv)), Fraction(0))
    return a, b, c


def trace_to_dict(trace: MmpTrace) -> dict:
    def fan_doc(fan):
        return [list(r) for r in fan.rays]

    steps = []
    for s in trace.steps:
        d = {"lambda": str(s.lambda_), "T": str(s.T), "kind": s.kind.kind.value,
             "contracted_rays": list(s.kind.rays) if s.kind.kind is Kind.DIVISORIAL else [],
             "extremal_rays": list(s.kind.rays),
             "limit_volume": str(s.limit_volume)}
        if s.pair_after is not None:
            d["fan"] = fan_doc(s.pair_after.fan)
            d["H"] = [str(c) for c in s.pair_after.H.coeffs]
        steps.append(d)
    doc = {"initial": {"rays": fan_doc(trace.initial.fan),
                       "H": [str(c) for c in trace.initial.H.coeffs]},
           "steps": steps,
           "terminal": trace.terminal.value if trace.terminal else None}
    if trace.failure is not None:
        f = trace.failure
        doc["failure"] = {"lambda": str(f.lambda_), "T": str(f.T),
                          "extremal_rays": list(f.extremal), "reason": f.reason}
    return doc


def trace_to_json(trace: MmpTrace) -> str:
    return json.dumps(trace_to_dict(trace), sort_keys=True, indent=2)


def render_table(trace: MmpTrace) -> str:
    lines = ["%-4s %-10s %-10s %-12s %s" % ("step", "lambda", "T", "kind", "rays")]
    for k, s in enumerate(trace.steps):
        lines.append("%-4d %-10s %-10s %-12s %s" % (
            k, s.lambda_, s.T, s.kind.kind.value, ",".join(map(str, s.kind.rays))))
    lines.append("terminal: %s" % (trace.terminal.value if trace.terminal else "-"))
    if trace.failure is not None:
        lines.append("failure at T=%s: %s" % (trace.failure.T, trace.failure.reason))
    return "\n".join(lines)
