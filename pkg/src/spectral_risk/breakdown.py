"""Shared result container for generalization-error computations."""

from __future__ import annotations

from dataclasses import dataclass

PROVENANCES = ("exact", "asymptotic", "nmno", "monte-carlo")


@dataclass(frozen=True)
class LossBreakdown:
    """Bias / dataset-variance / noise-variance split of a generalization error.

    ``total`` always equals the sum of the three parts; for provenances that
    do not resolve a part (e.g. the RMT functional averages over datasets
    before the split is possible) the unresolved part is folded into ``bias``
    and noted in the producing function's docstring.
    """

    bias: float
    variance_dataset: float
    variance_noise: float
    total: float
    provenance: str
    stderr: float | None = None

    @classmethod
    def from_parts(
        cls,
        bias: float,
        variance_dataset: float,
        variance_noise: float,
        provenance: str,
        stderr: float | None = None,
    ) -> "LossBreakdown":
        if provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {provenance!r}")
        return cls(
            bias=float(bias),
            variance_dataset=float(variance_dataset),
            variance_noise=float(variance_noise),
            total=float(bias) + float(variance_dataset) + float(variance_noise),
            provenance=provenance,
            stderr=stderr,
        )
