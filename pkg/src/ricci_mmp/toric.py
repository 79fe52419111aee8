"""Exact intersection theory on smooth complete toric surfaces.

A fan is a cyclically ordered list of primitive rays u_0, ..., u_{N-1} with
det(u_i, u_{i+1}) = 1.  Torus-invariant curves D_i correspond to rays, adjacent
curves meet transversally in one point, and the fan relation

    u_{i-1} + u_{i+1} = a_i u_i,    D_i . D_i = -a_i

determines every intersection number.  All divisor arithmetic uses
``fractions.Fraction``; nothing in this module touches floating point except
the angle sort used to normalize ray order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

Ray = tuple[int, int]


class FanError(ValueError):
    pass


class NotPrimitive(FanError):
    pass


class NotSmooth(FanError):
    pass


class NotComplete(FanError):
    pass


class DuplicateRay(FanError):
    pass


class InternalRelationFailure(RuntimeError):
    """The fan relation failed on a fan that passed validation."""


class LengthMismatch(ValueError):
    pass


class NotAmple(ValueError):
    pass


class NotContractible(ValueError):
    pass


def det(u: Ray, v: Ray) -> int:
    return u[0] * v[1] - u[1] * v[0]


@dataclass(frozen=True)
class ToricSurfaceFan:
    rays: tuple[Ray, ...]

    def __len__(self) -> int:
        return len(self.rays)

    def ray(self, i: int) -> Ray:
        return self.rays[i % len(self.rays)]

    def neighbors(self, i: int) -> tuple[int, int]:
        n = len(self.rays)
        return (i - 1) % n, (i + 1) % n


@dataclass(frozen=True)
class WeilDivisor:
    coeffs: tuple[Fraction, ...]

    @classmethod
    def of(cls, values: Iterable) -> "WeilDivisor":
        return cls(tuple(Fraction(v) for v in values))

    def __len__(self) -> int:
        return len(self.coeffs)

    def __add__(self, other: "WeilDivisor") -> "WeilDivisor":
        if len(self) != len(other):
            raise LengthMismatch("divisors live on different fans")
        return WeilDivisor(tuple(a + b for a, b in zip(self.coeffs, other.coeffs)))

    def __sub__(self, other: "WeilDivisor") -> "WeilDivisor":
        return self + other.scale(-1)

    def scale(self, c) -> "WeilDivisor":
        c = Fraction(c)
        return WeilDivisor(tuple(c * a for a in self.coeffs))

    def __repr__(self) -> str:
        return "WeilDivisor(%s)" % ", ".join(str(c) for c in self.coeffs)


def _angle(u: Ray) -> float:
    a = math.atan2(u[1], u[0])
    return a if a >= 0 else a + 2 * math.pi


def validate_fan(rays: Sequence[Sequence[int]]) -> ToricSurfaceFan:
    """Check primitivity, distinctness, completeness and smoothness.

    Rays are re-sorted counterclockwise by angle starting from the positive
    x-axis, so the returned order may differ from the input order.
    """
    if not rays:
        raise FanError("empty ray list")
    clean: list[Ray] = []
    for r in rays:
        x, y = int(r[0]), int(r[1])
        if (x, y) == (0, 0) or math.gcd(abs(x), abs(y)) != 1:
            raise NotPrimitive("ray %r is not primitive" % ((x, y),))
        clean.append((x, y))
    if len(set(clean)) != len(clean):
        raise DuplicateRay("repeated ray in %r" % (clean,))
    if len(clean) < 3:
        raise NotComplete("a complete surface fan needs at least 3 rays")
    clean.sort(key=_angle)
    n = len(clean)
    for i in range(n):
        u, v = clean[i], clean[(i + 1) % n]
        d = det(u, v)
        # consecutive rays must open a sector of angle < pi
        if d <= 0:
            raise NotComplete("rays %r, %r leave a gap of angle >= pi" % (u, v))
        if d != 1:
            raise NotSmooth("det(%r, %r) = %d" % (u, v, d))
    return ToricSurfaceFan(tuple(clean))


def self_intersections(fan: ToricSurfaceFan) -> tuple[int, ...]:
    out = []
    for i in range(len(fan)):
        p, q = fan.neighbors(i)
        s = (fan.rays[p][0] + fan.rays[q][0], fan.rays[p][1] + fan.rays[q][1])
        u = fan.rays[i]
        # s = a u; det(u, next) = 1 lets us read a off a dot-free formula
        a = det(s, fan.rays[q])
        if (a * u[0], a * u[1]) != s:
            raise InternalRelationFailure("fan relation fails at ray %d" % i)
        out.append(-a)
    return tuple(out)


def _check_len(fan: ToricSurfaceFan, D: WeilDivisor) -> None:
    if len(D) != len(fan):
        raise LengthMismatch("divisor has %d coefficients, fan has %d rays" % (len(D), len(fan)))


def intersection_number(fan: ToricSurfaceFan, D: WeilDivisor, i: int,
                        profile: Sequence[int] | None = None) -> Fraction:
    """D . D_i for the invariant curve of ray ``i``."""
    _check_len(fan, D)
    if profile is None:
        profile = self_intersections(fan)
    n = len(fan)
    i %= n
    p, q = fan.neighbors(i)
    c = D.coeffs
    return c[p] + c[i] * profile[i] + c[q]


def intersection_vector(fan: ToricSurfaceFan, D: WeilDivisor) -> tuple[Fraction, ...]:
    prof = self_intersections(fan)
    return tuple(intersection_number(fan, D, i, prof) for i in range(len(fan)))


def self_intersection(fan: ToricSurfaceFan, D: WeilDivisor) -> Fraction:
    """D . D, expanded bilinearly over the invariant curves."""
    return sum((c * x for c, x in zip(D.coeffs, intersection_vector(fan, D))), Fraction(0))


def canonical_divisor(fan: ToricSurfaceFan) -> WeilDivisor:
    return WeilDivisor(tuple(Fraction(-1) for _ in fan.rays))


def is_nef(fan: ToricSurfaceFan, D: WeilDivisor) -> bool:
    return all(x >= 0 for x in intersection_vector(fan, D))


def is_ample(fan: ToricSurfaceFan, D: WeilDivisor) -> bool:
    return all(x > 0 for x in intersection_vector(fan, D))


def threshold_ratios(fan: ToricSurfaceFan, H: WeilDivisor) -> list[Fraction | None]:
    """(H.D_i)/(-K.D_i) for K-negative curves, None elsewhere."""
    hv = intersection_vector(fan, H)
    kv = intersection_vector(fan, canonical_divisor(fan))
    return [h / -k if k < 0 else None for h, k in zip(hv, kv)]


def nef_threshold(fan: ToricSurfaceFan, H: WeilDivisor) -> Fraction | float:
    """sup{t > 0 : H + tK nef}, exact; ``math.inf`` if K is nef."""
    if not is_ample(fan, H):
        raise NotAmple("H is not ample on this fan")
    ratios = [r for r in threshold_ratios(fan, H) if r is not None]
    if not ratios:
        return math.inf
    return min(ratios)


def blow_down(fan: ToricSurfaceFan, i: int) -> ToricSurfaceFan:
    i %= len(fan)
    if len(fan) <= 3 or self_intersections(fan)[i] != -1:
        raise NotContractible("ray %d is not a (-1)-curve" % i)
    rays = fan.rays[:i] + fan.rays[i + 1:]
    return validate_fan(rays)


def blow_up(fan: ToricSurfaceFan, i: int) -> ToricSurfaceFan:
    """Star subdivision of the cone spanned by rays i and i+1."""
    n = len(fan)
    i %= n
    u, v = fan.rays[i], fan.rays[(i + 1) % n]
    return validate_fan(fan.rays + ((u[0] + v[0], u[1] + v[1]),))


def blow_up_index(fan: ToricSurfaceFan, new_fan: ToricSurfaceFan, i: int) -> int:
    """Index in ``new_fan`` of the ray created by ``blow_up(fan, i)``."""
    n = len(fan)
    u, v = fan.rays[i % n], fan.rays[(i + 1) % n]
    return new_fan.rays.index((u[0] + v[0], u[1] + v[1]))


def pullback(fan: ToricSurfaceFan, D: WeilDivisor, i: int) -> tuple[ToricSurfaceFan, WeilDivisor]:
    """Blow up cone (i, i+1) and pull D back; the new ray gets c_i + c_{i+1}."""
    _check_len(fan, D)
    n = len(fan)
    i %= n
    new = blow_up(fan, i)
    old_index = {r: k for k, r in enumerate(fan.rays)}
    coeffs = []
    for r in new.rays:
        if r in old_index:
            coeffs.append(D.coeffs[old_index[r]])
        else:
            coeffs.append(D.coeffs[i] + D.coeffs[(i + 1) % n])
    return new, WeilDivisor(tuple(coeffs))


def pushforward(fan: ToricSurfaceFan, D: WeilDivisor, i: int) -> WeilDivisor:
    _check_len(fan, D)
    i %= len(fan)
    if len(fan) <= 3 or self_intersections(fan)[i] != -1:
        raise NotContractible("ray %d is not a (-1)-curve" % i)
    return WeilDivisor(D.coeffs[:i] + D.coeffs[i + 1:])


def isomorphic(a: ToricSurfaceFan, b: ToricSurfaceFan) -> bool:
    """Brute-force search for a GL(2, Z) map carrying a's rays onto b's."""
    if len(a) != len(b):
        return False
    n = len(a)
    u0, u1 = a.rays[0], a.rays[1]
    # [u0 u1] has det 1, so its inverse is integral
    inv = ((u1[1], -u1[0]), (-u0[1], u0[0]))
    for k in range(n):
        for step in (1, -1):
            w0, w1 = b.rays[k], b.rays[(k + step) % n]
            # A = [w0 w1] @ inv
            A = ((w0[0] * inv[0][0] + w1[0] * inv[1][0], w0[0] * inv[0][1] + w1[0] * inv[1][1]),
                 (w0[1] * inv[0][0] + w1[1] * inv[1][0], w0[1] * inv[0][1] + w1[1] * inv[1][1]))
            if abs(A[0][0] * A[1][1] - A[0][1] * A[1][0]) != 1:
                continue
            ok = all(
                (A[0][0] * r[0] + A[0][1] * r[1], A[1][0] * r[0] + A[1][1] * r[1])
                == b.rays[(k + step * j) % n]
                for j, r in enumerate(a.rays)
            )
            if ok:
                return True
    return False


P2 = ((1, 0), (0, 1), (-1, -1))
F1 = ((1, 0), (0, 1), (-1, 1), (0, -1))


def fan_to_json(fan: ToricSurfaceFan, divisors: dict[str, WeilDivisor] | None = None) -> str:
    doc = {"rays": [list(r) for r in fan.rays],
           "divisors": {k: [str(c) for c in D.coeffs] for k, D in (divisors or {}).items()}}
    return json.dumps(doc, sort_keys=True)


def fan_from_json(text: str) -> tuple[ToricSurfaceFan, dict[str, WeilDivisor]]:
    doc = json.loads(text)
    raw = [tuple(r) for r in doc["rays"]]
    fan = validate_fan(raw)
    # divisor coefficients are given in input ray order; follow the re-sort
    order = [raw.index(r) for r in fan.rays]
    divisors = {}
    for name, coeffs in doc.get("divisors", {}).items():
        if len(coeffs) != len(raw):
            raise LengthMismatch("divisor %r has %d coefficients" % (name, len(coeffs)))
        vals = [Fraction(c) for c in coeffs]
        divisors[name] = WeilDivisor(tuple(vals[j] for j in order))
    return fan, divisors
