"""Published reference data of the modeled experiment, shipped in-repo.

Three records are bundled: the measured density-matrix elements (32
diagonals + 6 coherences), the six subspace GHZ fidelities, and the
per-layer QKD error table with published key rates.  Reports embed these
beside computed values so regressions show up in diffs.
"""

from __future__ import annotations

import json
from importlib import resources

from .qkd import QberReport
from .witness import ElementEstimate

__all__ = [
    "REFERENCE_EXPERIMENT",
    "load_measured_elements",
    "load_measured_subspace_fidelities",
    "load_measured_qkd_rows",
    "qber_report_from_row",
]

#: Headline numbers of the reference experiment.
REFERENCE_EXPERIMENT = {
    "fidelity": 0.854,
    "fidelity_std": 0.007,
    "dimensionality_bound": 0.750,
    "sigma_margin_floor": 14,
    "counting_rate_per_s": 0.66,
    "integration_time_s": 1800.0,
    "matched_visibility": 0.8493,
}


def _load(name: str) -> dict:
    with resources.files("layered442.data").joinpath(name).open() as fh:
        return json.load(fh)


def load_measured_elements():
    """Measured elements as (diagonals, offdiagonals) ElementEstimate tuples."""
    data = _load("measured_density_elements.json")
    diagonals = tuple(
        ElementEstimate(ket, ket, value, std)
        for ket, (value, std) in data["diagonal"].items()
    )
    offdiagonals = tuple(
        ElementEstimate(*key.split("|"), value, std)
        for key, (value, std) in data["offdiagonal"].items()
    )
    return diagonals, offdiagonals


def load_measured_subspace_fidelities() -> dict:
    """Published subspace fidelities keyed by ("ijk", "lmn") pairs."""
    data = _load("measured_subspace_fidelities.json")
    return {tuple(k.split("|")): tuple(v) for k, v in data["fidelities"].items()}


def load_measured_qkd_rows() -> list[dict]:
    return _load("measured_qkd_table.json")["rows"]


def qber_report_from_row(row: dict) -> QberReport:
    """Build a QberReport from a published QKD table row."""
    kwargs = dict(
        layer_id=row["layer"],
        qber_z=row["qber_z"][0],
        qber_z_std=row["qber_z"][1],
        qber_x=row["qber_x"][0],
        qber_x_std=row["qber_x"][1],
    )
    for key in ("qber_z_ab", "qber_z_ac"):
        if key in row:
            kwargs[key] = row[key][0]
            kwargs[key + "_std"] = row[key][1]
    return QberReport(**kwargs)
