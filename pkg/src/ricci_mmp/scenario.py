"""Strict JSON scenario schema (version 1).

Every scenario carries ``schema``, ``kind``, ``seed`` and a ``paper_ref``
string naming the statement it exercises; unknown keys are rejected.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError, field_validator

from .density import DensitySpec, Mode, PerturbationParams

SEED_MAX = 2 ** 64 - 1


class SchemaError(ValueError):
    pass


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ModeModel(Strict):
    amplitude: float
    kx: int
    ky: int
    phase: float = 0.0


class PointModel(Strict):
    x: float
    y: float
    order: float


class DensityModel(Strict):
    constant: float = 1.0
    modes: tuple[ModeModel, ...] = ()
    zeros: tuple[PointModel, ...] = ()
    poles: tuple[PointModel, ...] = ()
    signed: bool = False

    def build(self) -> DensitySpec:
        return DensitySpec(
            constant=self.constant,
            modes=tuple(Mode(m.amplitude, m.kx, m.ky, m.phase) for m in self.modes),
            zeros=tuple(((z.x, z.y), z.order) for z in self.zeros),
            poles=tuple(((p.x, p.y), p.order) for p in self.poles),
            signed=self.signed,
        )


class PerturbationModel(Strict):
    s: float = 0.0
    w: float = 0.0
    r: float = 0.0
    delta: float = 0.0

    def build(self) -> PerturbationParams:
        return PerturbationParams(self.s, self.w, self.r, self.delta)


class TolerancesModel(Strict):
    newton_tol: float = 1e-12
    dt0: float = 1e-3
    dt_min: float = 1e-8
    dt_max: float = 0.05


class InitialModel(Strict):
    kind: Literal["zero", "rough", "smooth_approx"] = "zero"
    target: DensityModel | None = None
    j: int | None = None


FlowCheck = Literal["class_linearity", "volume_band", "smoothing", "scalar_curvature", "fixed_point"]


class _Base(Strict):
    schema_: Literal[1] = Field(alias="schema")
    seed: int = Field(0, ge=0, le=SEED_MAX)
    paper_ref: str
    description: str = ""


class MmpScenario(_Base):
    kind: Literal["mmp"]
    rays: tuple[tuple[int, int], ...]
    H: tuple[Union[int, str], ...]
    expect_T: tuple[str, ...] | None = None
    expect_lambdas: tuple[str, ...] | None = None
    expect_terminal: str | None = None


class FlowScenario(_Base):
    kind: Literal["flow"]
    grids: tuple[int, ...] = (64,)
    laplacian: Literal["spectral", "fd2"] = "spectral"
    mode: Literal["unnormalized", "normalized"] = "unnormalized"
    g0: DensityModel = DensityModel()
    F: DensityModel = DensityModel()
    chi_mode: Literal["from_f", "prescribed"] = "from_f"
    chi: DensityModel | None = None
    t_end: float = Field(1.0, gt=0)
    perturbation: PerturbationModel = PerturbationModel()
    tolerances: TolerancesModel = TolerancesModel()
    initial: InitialModel = InitialModel()
    sample_times: tuple[float, ...] = ()
    extra_degeneracy: tuple[tuple[float, float], ...] = ()
    exclusion_radius: float = 0.1
    checks: tuple[FlowCheck, ...] = ("class_linearity",)
    t_min: float = Field(0.1, gt=0)
    smoothing_time: float = 0.25
    fixed_point_tol: float = 1e-5

    @field_validator("grids")
    @classmethod
    def _grids(cls, v):
        if not v:
            raise ValueError("at least one grid size is required")
        return v


class EllipticScenario(_Base):
    kind: Literal["elliptic"]
    problem: Literal["linear", "semilinear", "stability"]
    grids: tuple[int, ...] = (64,)
    g0: DensityModel = DensityModel()
    F: DensityModel = DensityModel()
    chi: DensityModel = DensityModel()
    tol: float = 1e-10
    pairs: int = Field(100, ge=1)
    epsilon: float = Field(0.05, gt=0)
    stability_tolerance: float = 0.2


class SphereScenario(_Base):
    kind: Literal["sphere"]
    m: int = Field(128, ge=32)
    profiles: tuple[tuple[float, ...], ...]
    mode: Literal["unnormalized", "normalized"] = "unnormalized"
    T0: float | None = None
    t_end: float = 20.0
    tol: float = 1e-2


class SuiteScenario(_Base):
    kind: Literal["suite"]
    suites: tuple[str, ...] = ("all",)


Scenario = Annotated[Union[MmpScenario, FlowScenario, EllipticScenario, SphereScenario, SuiteScenario],
                     Field(discriminator="kind")]
_adapter = TypeAdapter(Scenario)


def parse_scenario(doc) -> MmpScenario | FlowScenario | EllipticScenario | SphereScenario | SuiteScenario:
    if not isinstance(doc, dict):
        raise SchemaError("scenario must be a JSON object")
    try:
        return _adapter.validate_python(doc)
    except ValidationError as exc:
        raise SchemaError(str(exc)) from None


def load_scenario(path) -> MmpScenario | FlowScenario | EllipticScenario | SphereScenario | SuiteScenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SchemaError("cannot read %s: %s" % (path, exc)) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("malformed JSON in %s: %s" % (path, exc)) from None
    return parse_scenario(doc)
