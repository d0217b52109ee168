"""Log-log SVG charts of aggregated experiment rows."""

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

__all__ = ["plot_agg"]

_X_AXIS = {"fig3_mid": "n", "fig3_left": "N", "fig3_right": "N",
           "rates_mise": "N", "rates_miae": "N"}


def _num(v):
    try:
        return float(v)
    except (TypeError, ValueError):
        return math.nan


def plot_agg(agg, path, experiment, metric=None):
    """Draw one line per ``(regime, delta_mode)`` with its confidence band.

    Returns ``False`` (and writes nothing) when no row has a usable x value.
    """
    xkey = _X_AXIS.get(experiment, "N")
    metric = metric or {"rates_mise": "mise", "rates_miae": "miae"}.get(experiment, "mae")
    series = {}
    for row in agg:
        if row.get("metric") != metric:
            continue
        x, y = _num(row.get(xkey)), _num(row.get("value"))
        if not (x > 0 and y > 0):
            continue
        key = (str(row.get("regime", "")), str(row.get("delta_mode", "")))
        series.setdefault(key, []).append((x, y, _num(row.get("ci_lo")), _num(row.get("ci_hi"))))
    if not series:
        return False
    plt.rcParams["svg.hashsalt"] = "kdeis"
    fig, ax = plt.subplots(figsize=(6, 4.2))
    for (regime, mode), pts in sorted(series.items()):
        pts.sort()
        xs = [p[0] for p in pts]
        label = ", ".join(s for s in (regime, f"delta={mode}" if mode else "") if s)
        (line,) = ax.plot(xs, [p[1] for p in pts], marker="o", ms=3, label=label)
        lo = [p[2] if p[2] > 0 else p[1] for p in pts]
        hi = [p[3] if p[3] > 0 else p[1] for p in pts]
        ax.fill_between(xs, lo, hi, color=line.get_color(), alpha=0.2, lw=0)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(xkey)
    ax.set_ylabel(metric.upper())
    ax.set_title(experiment)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return True
