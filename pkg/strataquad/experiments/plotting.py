"""Standalone SVG log-log plots of schedule tables."""

from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from strataquad.models import FitKind, FitReport  # noqa: E402


def render_loglog_svg(
    N: Sequence[float],
    e2: Sequence[float],
    path: Path,
    fit: Optional[FitReport] = None,
    title: str = "",
) -> Path:
    """Draw e2 against N on log-log axes, with the fitted curve when given.

    Output is byte-stable across runs: no date metadata and a fixed hash salt.
    """
    N = np.asarray(N, dtype=float)
    e2 = np.asarray(e2, dtype=float)
    with plt.rc_context({"svg.hashsalt": "strataquad", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4.5))
        ax.loglog(N, e2, "o-", label="exact MSE")
        if fit is not None and fit.kind in (FitKind.SINGLE, FitKind.TWO_POWER):
            grid = np.geomspace(N[0], N[-1], 64)
            if fit.kind == FitKind.SINGLE:
                curve = fit.params["C"] * grid ** -fit.params["rate"]
                label = f"fit {fit.params['C']:.4g} N^-{fit.params['rate']:.3f}"
            else:
                curve = (
                    fit.params["C1"] * grid ** -fit.params["p1"]
                    + fit.params["C2"] * grid ** -fit.params["p2"]
                )
                label = "two-power fit"
            ax.loglog(grid, curve, "--", label=label)
        ax.set_xlabel("N")
        ax.set_ylabel("e2")
        if title:
            ax.set_title(title)
        ax.legend()
        ax.grid(True, which="both", alpha=0.3)
        path = Path(path)
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path
