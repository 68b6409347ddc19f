"""CSV and SVG emission with atomic writes and content digests."""

from __future__ import annotations

import hashlib
import io
import os
import tempfile
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams["svg.hashsalt"] = "dasa"
plt.rcParams["svg.fonttype"] = "none"

FLOAT_FMT = "{:.17g}"


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return FLOAT_FMT.format(float(x))


def atomic_write(path, data: str | bytes) -> str:
    """Write via a temporary file and rename; return the sha256 hex digest."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    raw = data.encode("utf-8") if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(raw)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return hashlib.sha256(raw).hexdigest()


def csv_text(header: list[str], rows) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def trajectory_header(dim: int) -> list[str]:
    cols = ["t"]
    for k in range(dim):
        cols += [f"re_{k}", f"im_{k}"]
    cols += [f"pop_{k}" for k in range(dim)]
    return cols + ["norm"]


def trajectory_csv(traj) -> str:
    """Columns ``t, re_k, im_k (per state), pop_k (per state), norm``."""
    pops = traj.populations
    norm = pops.sum(axis=1)
    rows = []
    for i, t in enumerate(traj.times):
        row = [t]
        for a in traj.states[i]:
            row += [a.real, a.imag]
        row += list(pops[i])
        row.append(norm[i])
        rows.append(row)
    return csv_text(trajectory_header(traj.dim), rows)


def parse_csv(text: str) -> tuple[list[str], np.ndarray]:
    lines = text.strip("\n").split("\n")
    header = lines[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    return header, data


def _svg(fig) -> str:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()


def populations_svg(traj, title: str = "") -> str:
    fig, ax = plt.subplots(figsize=(6, 4))
    dim = traj.dim
    for k in range(dim):
        label = "(" + ",".join("1" if j == k else "0" for j in range(dim)) + ")$^T$"
        ax.plot(traj.times, traj.populations[:, k], label=label)
    ax.set_xlabel("t (1/coupling)")
    ax.set_ylabel("population")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    return _svg(fig)


def roots_svg(rows: list[dict], part: str) -> str:
    """Real (``part='re'``) or imaginary part of each cubic root vs gamma2, per delta_omega."""
    fig, ax = plt.subplots(figsize=(6, 4))
    dws = sorted({r["delta_omega"] for r in rows})
    for dw in dws:
        for branch in range(3):
            sel = [r for r in rows if r["delta_omega"] == dw and r["branch"] == branch]
            ax.plot(
                [r["gamma2"] for r in sel],
                [r[f"gamma1_{part}"] for r in sel],
                ".",
                ms=2,
                label=f"$\\Delta\\omega$={dw:g}" if branch == 0 else None,
                color=f"C{dws.index(dw)}",
            )
    ax.set_xlabel("$\\gamma_2$")
    ax.set_ylabel(("Re" if part == "re" else "Im") + " $\\gamma_1$")
    ax.legend()
    fig.tight_layout()
    return _svg(fig)


def history_svg(history) -> str:
    fig, ax = plt.subplots(figsize=(6, 4))
    costs = np.array([h.cost for h in history], dtype=float)
    best = np.minimum.accumulate(np.where(np.isfinite(costs), costs, np.inf))
    ax.plot(np.arange(1, len(costs) + 1), np.where(np.isfinite(costs), costs, np.nan), ".", ms=3, label="candidate")
    ax.plot(np.arange(1, len(costs) + 1), np.where(np.isfinite(best), best, np.nan), "-", label="best so far")
    ax.set_xlabel("evaluation")
    ax.set_ylabel("cost")
    ax.legend()
    fig.tight_layout()
    return _svg(fig)
