"""
Validated schemas for configuration files, reports and result tables
"""
import math
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

DEFAULT_P_SCHEDULE = [2.0, 10.0, 50.0, 100.0, 300.0, 500.0]

ERROR_TABLE_HEADER = ["p", "cells", "dofs", "L2", "H1", "W1inf", "dualL1", "dualLinf"]
DIAGNOSTICS_HEADER = ["p", "max_grad", "excess_area", "l1_residual", "sup_residual", "max_lambda"]


class ValidationReport(BaseModel):
    """Outcome of a mesh validation; an empty ``violations`` list means valid"""

    violations: List[str] = []
    vertices: int = 0
    triangles: int = 0
    edges: int = 0
    boundary_edges: int = 0
    euler_characteristic: int = 0
    min_area: Optional[float] = None
    max_area: Optional[float] = None
    min_angle: Optional[float] = None
    total_area: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        status = "valid" if self.ok else f"{len(self.violations)} violation(s)"
        angle = f"{self.min_angle:.2f}" if self.min_angle is not None else "n/a"
        return (
            f"{status}; min_area={self.min_area:.6g} max_area={self.max_area:.6g} "
            f"min_angle={angle}deg area={self.total_area:.12g}"
            if self.min_area is not None
            else status
        )


class SolverConfig(BaseModel):
    """Controls of the primal-dual descent and of the p-continuation"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    c1: float = Field(1e-4, gt=0.0, lt=1.0)
    shrink: float = Field(0.5, gt=0.0, lt=1.0)
    eps_tol: float = Field(1e-8, gt=0.0)
    max_outer: int = Field(5000, ge=1)
    cg_tol: float = Field(1e-10, gt=0.0)
    cg_maxit: Optional[int] = Field(None, ge=1)
    alpha_init: float = Field(1.0, gt=0.0)
    max_backtracks: int = Field(60, ge=0)
    p_schedule: List[float] = Field(default_factory=lambda: list(DEFAULT_P_SCHEDULE))
    direction: Literal["multiplier", "newton"] = "multiplier"

    @field_validator("p_schedule")
    @classmethod
    def _check_schedule(cls, value: List[float]) -> List[float]:
        if not value:
            raise ValueError("p_schedule must not be empty")
        if value[0] < 2:
            raise ValueError("p_schedule must start at p >= 2")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("p_schedule must be strictly increasing")
        if not all(math.isfinite(p) for p in value):
            raise ValueError("p_schedule entries must be finite")
        return value


class RunConfig(SolverConfig):
    """Flat JSON run configuration: domain, problem data, solver controls, exports"""

    domain: Literal["disk", "rectangle", "lshape"] = "disk"
    width: float = Field(2.0, gt=0.0)
    height: float = Field(1.0, gt=0.0)
    refinements: int = Field(4, ge=0)
    h: float = 4.0
    g: float = 0.0
    epsilon: float = Field(0.0, ge=0.0)
    output_dir: Optional[str] = None
    export_csv: bool = True
    export_vtk: bool = True
    export_json: bool = True
    seed: Optional[int] = None

    @field_validator("h", "g")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("must be finite")
        return value

    def solver_config(self) -> SolverConfig:
        return SolverConfig(**self.model_dump(include=set(SolverConfig.model_fields)))

    def mesh_recipe(self) -> "MeshRecipe":
        if self.domain == "rectangle":
            return MeshRecipe(
                domain="rectangle", refinements=self.refinements, width=self.width, height=self.height
            )
        return MeshRecipe(domain=self.domain, refinements=self.refinements)


class MeshRecipe(BaseModel):
    """How to regenerate a mesh; reports reference meshes by recipe"""

    model_config = ConfigDict(extra="forbid")

    domain: Literal["disk", "rectangle", "lshape", "custom"]
    refinements: int = Field(0, ge=0)
    width: Optional[float] = None
    height: Optional[float] = None
    path: Optional[str] = None


class ReportRecord(BaseModel):
    """Persisted form of a solve report (wall time is kept out for reproducibility)"""

    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    mesh: MeshRecipe
    h: float
    g: float
    p: float
    epsilon: float
    solver: Dict[str, Any]
    iterations: int
    converged: bool
    backtracks: int = 0
    u: List[float]
    multiplier: List[float] = Field(alias="lambda")
    energy_history: List[float]
    residual_history: List[float]
    step_history: List[float]
    cg_iterations: List[int] = []


class ErrorRow(BaseModel):
    """One row of the disk error table"""

    p: float
    cells: int = Field(ge=0)
    dofs: int = Field(ge=0)
    l2: float = Field(ge=0.0)
    h1: float = Field(ge=0.0)
    w1_inf: float = Field(ge=0.0)
    dual_l1: float = Field(ge=0.0)
    dual_linf: float = Field(ge=0.0)

    @field_validator("l2", "h1", "w1_inf", "dual_l1", "dual_linf")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("error norms must be finite")
        return value

    def values(self) -> List[Any]:
        return [self.p, self.cells, self.dofs, self.l2, self.h1, self.w1_inf, self.dual_l1, self.dual_linf]


class DiagnosticRow(BaseModel):
    """Per-stage summary of the constraint diagnostics"""

    p: float
    max_grad: float
    excess_area: float
    l1_residual: float
    sup_residual: float
    max_lambda: float

    def values(self) -> List[Any]:
        return [self.p, self.max_grad, self.excess_area, self.l1_residual, self.sup_residual, self.max_lambda]
