"""
Report files of one experiment run:

    report.json      full StabilityReport (sorted keys, byte-identical across reruns)
    table.csv        one row per (pair, n)
    timings.json     wall-clock seconds per pair and stage
    mesh_<NN>_<pair>_<side>.txt, boundary_<NN>_<pair>.txt   only when plot data is requested

Every file is written to a temp name and renamed into place.
"""
from __future__ import annotations
import json
import logging
import re
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np
import pandas as pd

from neumannlab.errors import ReportIoError
from neumannlab.maps.conformal_maps import boundary_image
from neumannlab.stability.experiment import PlotData, StabilityReport
from neumannlab.utils.jsonio import atomic_write, dumps_bytes

logger = logging.getLogger(__name__)

REPORT_FILE = "report.json"
TABLE_FILE = "table.csv"
TIMINGS_FILE = "timings.json"
BOUNDARY_ANGLES = 512

TABLE_COLUMNS = [
    "pair", "n", "lambda_1", "lambda_2", "gap", "lemma31_bound", "theorem_bound",
    "measure_bound", "threshold", "theorem_pass", "measure_pass", "lemma_pass",
]


def report_table(report: StabilityReport) -> pd.DataFrame:
    rows: List[Dict[str, Any]] = []
    for pair in report.pairs:
        lemma_rows = {r["n"]: r for r in (pair.lemma or {}).get("rows", [])}
        eig1 = (pair.spectrum_1 or {}).get("eigenvalues", [])
        eig2 = (pair.spectrum_2 or {}).get("eigenvalues", [])
        for b in pair.bounds:
            n = b["n"]
            rows.append({
                "pair": pair.pair,
                "n": n,
                "lambda_1": eig1[n - 1],
                "lambda_2": eig2[n - 1],
                "gap": b["observed_gap"],
                "lemma31_bound": b["lemma31_bound"],
                "theorem_bound": b["theorem_bound"],
                "measure_bound": b["measure_bound"],
                "threshold": b["nontriviality_threshold"],
                "theorem_pass": b["theorem_pass"],
                "measure_pass": b["measure_pass"],
                "lemma_pass": lemma_rows[n]["passed"] if n in lemma_rows else None,
            })
    return pd.DataFrame(rows, columns=TABLE_COLUMNS)


def _slug(i: int, label: str) -> str:
    return f"{i:02d}_" + re.sub(r"[^A-Za-z0-9._-]+", "_", label).strip("_")


def _mesh_text(plot: PlotData, vectors: np.ndarray) -> str:
    mesh = plot.mesh
    lines = [f"# x y psi_1..psi_{vectors.shape[1]}"]
    for z, vals in zip(mesh.vertices, vectors):
        lines.append(" ".join([repr(float(z.real)), repr(float(z.imag))] + [repr(float(v)) for v in vals]))
    lines.append("# triangles")
    lines.extend(f"{a} {b} {c}" for a, b, c in mesh.triangles)
    return "\n".join(lines) + "\n"


def _boundary_text(plot: PlotData) -> str:
    theta, w1 = boundary_image(plot.map_1, BOUNDARY_ANGLES)
    _, w2 = boundary_image(plot.map_2, BOUNDARY_ANGLES)
    lines = ["# theta re_phi1 im_phi1 re_phi2 im_phi2"]
    for t, a, b in zip(theta, w1, w2):
        lines.append(f"{float(t)!r} {float(a.real)!r} {float(a.imag)!r} {float(b.real)!r} {float(b.imag)!r}")
    return "\n".join(lines) + "\n"


def emit_report(report: StabilityReport, out_dir: Union[str, Path]) -> List[Path]:
    """Writes every report file into out_dir (created if needed); returns their paths."""
    out = Path(out_dir)
    written: List[Path] = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        written.append(atomic_write(out / REPORT_FILE, dumps_bytes(report.to_dict())))
        table = report_table(report).to_csv(index=False, lineterminator="\n")
        written.append(atomic_write(out / TABLE_FILE, table.encode("utf-8")))
        written.append(atomic_write(out / TIMINGS_FILE, dumps_bytes(report.timings)))
        for key, plot in report.plot_data.items():
            idx, _, label = key.partition(":")
            slug = _slug(int(idx), label)
            for side, vectors in (("1", plot.vectors_1), ("2", plot.vectors_2)):
                path = out / f"mesh_{slug}_{side}.txt"
                written.append(atomic_write(path, _mesh_text(plot, vectors).encode("utf-8")))
            written.append(atomic_write(out / f"boundary_{slug}.txt", _boundary_text(plot).encode("utf-8")))
    except OSError as e:
        logger.error("Failed to write report into %s: %r", out, e)
        raise ReportIoError(f"cannot write report into {out}: {e}") from e
    logger.info("Wrote %d report files into %s", len(written), out)
    return written


def load_report(path: Union[str, Path]) -> StabilityReport:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        logger.error("Failed to read report %s: %r", path, e)
        raise ReportIoError(f"cannot read report {path}: {e}") from e
    return StabilityReport.from_dict(data)
