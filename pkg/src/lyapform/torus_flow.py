"""Vector fields and closed 1-forms on flat tori.

Everything here works in the universal cover R^n: points are never wrapped
during integration, so the displacement of a trajectory directly carries its
homology class.  Fields and potentials are finite trigonometric polynomials
in the coordinates x_i (period 1 in each coordinate).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi

__all__ = [
    "TrigTerm",
    "TrigPoly",
    "TorusFlowSpec",
    "ClosedOneForm",
    "Trajectory",
    "ConfigurationError",
    "eval_vector_field",
    "pair_form_with_field",
    "integrate_trajectory",
    "integrate_form_along",
    "flow_map",
    "sup_speed",
    "zero_field",
    "linear_field",
    "morse_gradient_field",
    "periodic_orbit_field",
    "morse_potential",
    "MORSE_FIXED_POINTS",
    "PRESETS",
    "GOLDEN_ALPHA",
]

GOLDEN_ALPHA = (math.sqrt(5.0) - 1.0) / 2.0


class ConfigurationError(ValueError):
    """Raised when numerical parameters violate a documented bound."""


@dataclass(frozen=True)
class TrigTerm:
    c: float
    k: tuple[int, ...]
    basis: str = "cos"

    def __post_init__(self):
        if self.basis not in ("sin", "cos"):
            raise ValueError(f"basis must be 'sin' or 'cos', got {self.basis!r}")
        object.__setattr__(self, "k", tuple(int(v) for v in self.k))
        object.__setattr__(self, "c", float(self.c))

    def to_json(self) -> dict:
        return {"c": self.c, "k": list(self.k), "basis": self.basis}

    @classmethod
    def from_json(cls, obj: dict) -> "TrigTerm":
        return cls(c=obj["c"], k=tuple(obj["k"]), basis=obj["basis"])


class TrigPoly:
    """A real trigonometric polynomial sum_j c_j * {sin,cos}(2*pi*k_j . x)."""

    def __init__(self, terms: Iterable[TrigTerm], dim: int):
        self.terms = tuple(terms)
        self.dim = int(dim)
        for t in self.terms:
            if len(t.k) != self.dim:
                raise ValueError(f"frequency {t.k} does not match dim {self.dim}")
        m = len(self.terms)
        self._K = np.array([t.k for t in self.terms], dtype=float).reshape(m, self.dim)
        self._cs = np.array([t.c if t.basis == "sin" else 0.0 for t in self.terms])
        self._cc = np.array([t.c if t.basis == "cos" else 0.0 for t in self.terms])

    def __len__(self):
        return len(self.terms)

    def __eq__(self, other):
        if not isinstance(other, TrigPoly):
            return NotImplemented
        return self.dim == other.dim and self.terms == other.terms

    def __hash__(self):
        return hash((self.dim, self.terms))

    def __add__(self, other: "TrigPoly") -> "TrigPoly":
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        return TrigPoly(self.terms + other.terms, self.dim)

    def scaled(self, factor: float) -> "TrigPoly":
        return TrigPoly([TrigTerm(factor * t.c, t.k, t.basis) for t in self.terms], self.dim)

    def _phase(self, x: np.ndarray) -> np.ndarray:
        return TWO_PI * (x @ self._K.T)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if not self.terms:
            return np.zeros(x.shape[:-1])
        th = self._phase(x)
        return np.sin(th) @ self._cs + np.cos(th) @ self._cc

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if not self.terms:
            return np.zeros(x.shape)
        th = self._phase(x)
        # d/dx sin(2pi k.x) = 2pi k cos(.), d/dx cos(2pi k.x) = -2pi k sin(.)
        coeff = np.cos(th) * self._cs - np.sin(th) * self._cc
        return TWO_PI * (coeff @ self._K)

    def sup_abs_bound(self) -> float:
        return float(sum(abs(t.c) for t in self.terms))

    def to_json(self) -> list:
        return [t.to_json() for t in self.terms]

    @classmethod
    def from_json(cls, terms: list, dim: int) -> "TrigPoly":
        return cls([TrigTerm.from_json(t) for t in terms], dim)

    def __repr__(self):
        return f"TrigPoly(dim={self.dim}, terms={len(self.terms)})"


@dataclass(frozen=True)
class TorusFlowSpec:
    """Smooth vector field V on T^dim, one trig polynomial per axis."""

    dim: int
    components: tuple[TrigPoly, ...]
    name: str = "custom"

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if len(self.components) != self.dim:
            raise ValueError("need one component per axis")
        object.__setattr__(self, "components", tuple(self.components))
        for comp in self.components:
            if comp.dim != self.dim:
                raise ValueError("component dimension mismatch")
        # One phase matrix for all axes: cos terms become sin with a quarter-period shift.
        terms = [(i, t) for i, comp in enumerate(self.components) for t in comp.terms]
        Kt = np.array([t.k for _, t in terms], dtype=float).reshape(len(terms), self.dim).T
        phase = np.array([0.0 if t.basis == "sin" else 0.5 * math.pi for _, t in terms])
        W = np.zeros((len(terms), self.dim))
        for j, (i, t) in enumerate(terms):
            W[j, i] = t.c
        object.__setattr__(self, "_Kt", TWO_PI * Kt)
        object.__setattr__(self, "_phase", phase)
        object.__setattr__(self, "_W", W)

    @classmethod
    def from_terms(cls, components: Sequence[Sequence[tuple]], name: str = "custom") -> "TorusFlowSpec":
        """Build from nested ``(c, k, basis)`` tuples, one list per axis."""
        dim = len(components)
        polys = tuple(TrigPoly([TrigTerm(*t) for t in comp], dim) for comp in components)
        return cls(dim, polys, name)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self._W.shape[0] == 0:
            return np.zeros(x.shape)
        return np.sin(x @ self._Kt + self._phase) @ self._W

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "components": [c.to_json() for c in self.components],
            "name": self.name,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TorusFlowSpec":
        dim = int(obj["dim"])
        comps = tuple(TrigPoly.from_json(c, dim) for c in obj["components"])
        return cls(dim, comps, obj.get("name", "custom"))


@dataclass(frozen=True)
class ClosedOneForm:
    """omega = sum_i periods[i] dx_i + d(potential); its class is ``periods``."""

    periods: tuple[float, ...]
    potential: TrigPoly = None

    def __post_init__(self):
        object.__setattr__(self, "periods", tuple(float(a) for a in self.periods))
        if self.potential is None:
            object.__setattr__(self, "potential", TrigPoly([], len(self.periods)))
        if self.potential.dim != len(self.periods):
            raise ValueError("potential dimension does not match periods")

    @property
    def dim(self) -> int:
        return len(self.periods)

    @property
    def period_vector(self) -> np.ndarray:
        return np.array(self.periods)

    @property
    def is_linear(self) -> bool:
        return len(self.potential) == 0

    def coefficients(self, x) -> np.ndarray:
        """Pointwise coefficient vector of omega (its value as a covector)."""
        return self.period_vector + self.potential.gradient(x)

    def plus_exact(self, f: TrigPoly) -> "ClosedOneForm":
        return ClosedOneForm(self.periods, self.potential + f)

    def to_json(self) -> dict:
        return {"periods": list(self.periods), "potential": self.potential.to_json()}

    @classmethod
    def from_json(cls, obj: dict) -> "ClosedOneForm":
        periods = tuple(float(a) for a in obj["periods"])
        return cls(periods, TrigPoly.from_json(obj.get("potential", []), len(periods)))


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    points_unwrapped: np.ndarray
    step: float

    @property
    def start(self) -> np.ndarray:
        return self.points_unwrapped[0]

    @property
    def end(self) -> np.ndarray:
        return self.points_unwrapped[-1]

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    @property
    def displacement(self) -> np.ndarray:
        return self.points_unwrapped[-1] - self.points_unwrapped[0]


def _check_dim(dim: int, x: np.ndarray):
    if x.shape[-1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {x.shape}")


def eval_vector_field(spec: TorusFlowSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    _check_dim(spec.dim, x)
    return spec(x)


def pair_form_with_field(form: ClosedOneForm, spec: TorusFlowSpec, x) -> np.ndarray:
    """omega(V) at x; works on a single point or a batch of shape (..., dim)."""
    x = np.asarray(x, dtype=float)
    _check_dim(spec.dim, x)
    if form.dim != spec.dim:
        raise ValueError("form and field dimensions differ")
    return np.sum(form.coefficients(x) * spec(x), axis=-1)


def sup_speed(spec: TorusFlowSpec, samples_per_axis: int = 32) -> float:
    """Coarse estimate of sup |V| from a uniform lattice."""
    ax = (np.arange(samples_per_axis) + 0.5) / samples_per_axis
    mesh = np.stack(np.meshgrid(*([ax] * spec.dim), indexing="ij"), axis=-1).reshape(-1, spec.dim)
    return float(np.max(np.linalg.norm(spec(mesh), axis=-1), initial=0.0))


def _check_cfl(spec: TorusFlowSpec, step: float):
    vmax = sup_speed(spec)
    if step * vmax >= 0.25:
        raise ConfigurationError(
            f"step*sup|V| = {step:g}*{vmax:.6g} = {step * vmax:.6g} violates the bound step*sup|V| < 0.25"
        )


def _rk4(spec: TorusFlowSpec, x: np.ndarray, h: float) -> np.ndarray:
    k1 = spec(x)
    k2 = spec(x + 0.5 * h * k1)
    k3 = spec(x + 0.5 * h * k2)
    k4 = spec(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _steps_for(t_total: float, step: float) -> tuple[int, float]:
    n = max(1, int(math.ceil(t_total / step - 1e-12)))
    return n, t_total / n


def integrate_trajectory(spec: TorusFlowSpec, x0, t_total: float, step: float) -> Trajectory:
    """Fixed-step classical RK4 in the universal cover.

    The step is shrunk so that an integer number of steps lands exactly on
    ``t_total``.
    """
    x = np.asarray(x0, dtype=float).copy()
    _check_dim(spec.dim, x)
    if step <= 0 or t_total <= 0:
        raise ConfigurationError("step and t_total must be positive")
    _check_cfl(spec, step)
    n, h = _steps_for(t_total, step)
    pts = np.empty((n + 1, spec.dim))
    pts[0] = x
    for i in range(n):
        x = _rk4(spec, x, h)
        pts[i + 1] = x
    times = h * np.arange(n + 1)
    times[-1] = t_total
    return Trajectory(times, pts, h)


def flow_map(spec: TorusFlowSpec, x, t: float, step: float) -> np.ndarray:
    """Endpoints x*t for a batch of starting points (no history kept)."""
    x = np.array(x, dtype=float)
    _check_dim(spec.dim, x)
    _check_cfl(spec, step)
    n, h = _steps_for(t, step)
    for _ in range(n):
        x = _rk4(spec, x, h)
    return x


def integrate_form_along(form: ClosedOneForm, traj: Trajectory) -> float:
    """Exact line integral of a closed form along a lifted path."""
    if len(traj.points_unwrapped) == 0:
        raise ValueError("empty trajectory")
    a, b = traj.start, traj.end
    _check_dim(form.dim, b)
    f = form.potential
    return float(form.period_vector @ (b - a) + f(b) - f(a))


# -- builtin presets ---------------------------------------------------------

def zero_field(dim: int = 2) -> TorusFlowSpec:
    return TorusFlowSpec(dim, tuple(TrigPoly([], dim) for _ in range(dim)), "zero")


def linear_field(velocity: Sequence[float] | None = None, alpha: float = GOLDEN_ALPHA) -> TorusFlowSpec:
    """Constant field; the default is (1, alpha) with alpha the golden ratio conjugate."""
    if velocity is None:
        velocity = (1.0, alpha)
    dim = len(velocity)
    zero_k = (0,) * dim
    comps = tuple(TrigPoly([TrigTerm(v, zero_k, "cos")] if v else [], dim) for v in velocity)
    return TorusFlowSpec(dim, comps, "linear")


def morse_gradient_field() -> TorusFlowSpec:
    """V = -grad F with F = cos(2 pi x1) + cos(2 pi x2).

    Fixed points sit at x_i in {0, 1/2}: a source at (0, 0), a sink at
    (1/2, 1/2) and saddles at (0, 1/2), (1/2, 0).
    """
    comps = (
        [(TWO_PI, (1, 0), "sin")],
        [(TWO_PI, (0, 1), "sin")],
    )
    return TorusFlowSpec.from_terms(comps, "morse_gradient")


def morse_potential() -> TrigPoly:
    return TrigPoly([TrigTerm(1.0, (1, 0), "cos"), TrigTerm(1.0, (0, 1), "cos")], 2)


MORSE_FIXED_POINTS = {
    "source": (0.0, 0.0),
    "sink": (0.5, 0.5),
    "saddle_a": (0.0, 0.5),
    "saddle_b": (0.5, 0.0),
}


def periodic_orbit_field(contraction: float = 0.25) -> TorusFlowSpec:
    """V = (1, -contraction * sin(2 pi x2)).

    The circle x2 = 0 is an attracting periodic orbit of period 1 and
    homology class (1, 0); x2 = 1/2 is a repelling one in the same class.
    """
    comps = (
        [(1.0, (0, 0), "cos")],
        [(-contraction, (0, 1), "sin")],
    )
    return TorusFlowSpec.from_terms(comps, "periodic_orbit")


PRESETS = {
    "zero": zero_field,
    "linear": linear_field,
    "morse_gradient": morse_gradient_field,
    "periodic_orbit": periodic_orbit_field,
}
