"""Observability report schemas."""

from pydantic import BaseModel, Field, computed_field


class ObservabilityCell(BaseModel):
    """Rank diagnostics of the stacked Lie-gradient matrix at one state."""

    coordinates: dict[str, float]  # grid coordinate name -> value (degrees or meters)
    rank: int = Field(..., ge=0)
    sigma_min: float = Field(..., ge=0)
    sigma_max: float = Field(..., ge=0)
    singular: bool


class ObservabilityReport(BaseModel):
    """Singularity sweep of one model over a state grid."""

    model: str
    state_dimension: int = Field(..., ge=1)
    rows: int = Field(..., ge=1)
    tolerance: float = Field(..., gt=0)
    cells: list[ObservabilityCell]

    @computed_field  # type: ignore[prop-decorator]
    @property
    def singular_count(self) -> int:
        return sum(cell.singular for cell in self.cells)

    def singular_cells(self) -> list[ObservabilityCell]:
        return [cell for cell in self.cells if cell.singular]

    def summary(self) -> str:
        """Human-readable description of the singular region."""
        lines = [
            f"model: {self.model}",
            f"state dimension: {self.state_dimension}, matrix rows: {self.rows}",
            f"relative tolerance: {self.tolerance:g}",
            f"cells: {len(self.cells)}, singular: {self.singular_count}",
        ]
        singular = self.singular_cells()
        if not singular:
            lines.append("no singular cells")
            return "\n".join(lines)
        for name in singular[0].coordinates:
            values = sorted({round(cell.coordinates[name], 9) for cell in singular})
            if len(values) <= 8:
                shown = ", ".join(f"{v:g}" for v in values)
            else:
                shown = f"{values[0]:g} .. {values[-1]:g} ({len(values)} values)"
            lines.append(f"singular {name}: {shown}")
        return "\n".join(lines)
