"""Build and write layered set figures from a spec."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Polygon as MplPolygon  # noqa: E402

from . import reader  # noqa: E402

# fixed color convention: green non-saturated regions, orange saturated
# ones, blue for the no-saturation admissible set, purple sample points
_FILL = {
    "nonsat": dict(facecolor="tab:green", edgecolor="darkgreen", alpha=0.45),
    "saturated": dict(facecolor="tab:orange", edgecolor="peru", alpha=0.45),
    "moas": dict(facecolor="tab:blue", edgecolor="navy", alpha=0.55),
}
_POINTS = {
    "samples": dict(color="tab:purple", marker=".", linestyle="none",
                    markersize=3),
}
_LINE = {
    "constraint": dict(color="black", linestyle="--", linewidth=1.0),
}


def _draw_polygons(ax, loops, style, label, zorder):
    if style in _FILL:
        kw = _FILL[style]
        for j, loop in enumerate(loops):
            ax.add_patch(MplPolygon(loop, closed=True, zorder=zorder,
                                    label=label if j == 0 else None, **kw))
    elif style in _LINE:
        kw = _LINE[style]
        for j, loop in enumerate(loops):
            closed = list(loop) + [loop[0]]
            xs = [p[0] for p in closed]
            ys = [p[1] for p in closed]
            ax.plot(xs, ys, zorder=zorder,
                    label=label if j == 0 else None, **kw)
    else:
        raise ValueError(f"style {style!r} cannot draw polygons")


def build_figure(spec):
    """-> (matplotlib figure, per-layer structure).

    The structure is a list of dicts, one per layer in draw order:
    label, style, kind, count (polygons or points) and an `empty` flag.
    A polygons layer with no loops is annotated "empty set" on the axes
    instead of drawn.
    """
    fig, ax = plt.subplots(figsize=(6.0, 6.0))
    layers_info = []
    for idx, layer in enumerate(spec.layers):
        zorder = 2 + idx
        if layer.kind == "polygons":
            loops = reader.read_polygons(layer.path)
            if loops:
                _draw_polygons(ax, loops, layer.style, layer.label, zorder)
            else:
                note = "empty set"
                if layer.label:
                    note = f"{layer.label}: empty set"
                ax.annotate(note, xy=(0.5, 0.05 + 0.05 * idx),
                            xycoords="axes fraction", ha="center",
                            fontsize=9, color="dimgray")
            layers_info.append({"label": layer.label, "style": layer.style,
                                "kind": "polygons", "count": len(loops),
                                "empty": not loops})
        else:
            pts = reader.read_points(layer.path, status=layer.status)
            if pts.shape[0]:
                kw = _POINTS.get(layer.style,
                                 _POINTS["samples"])
                ax.plot(pts[:, 0], pts[:, 1], zorder=zorder,
                        label=layer.label or None, **kw)
            layers_info.append({"label": layer.label, "style": layer.style,
                                "kind": "points",
                                "count": int(pts.shape[0]),
                                "empty": pts.shape[0] == 0})

    ax.set_aspect("equal", adjustable="datalim")
    ax.autoscale_view()
    if spec.xlim:
        ax.set_xlim(*spec.xlim)
    if spec.ylim:
        ax.set_ylim(*spec.ylim)
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    if spec.title:
        ax.set_title(spec.title)
    if any(layer.label for layer in spec.layers):
        ax.legend(loc="upper right", fontsize=8)
    return fig, layers_info


def render(spec):
    """Write the figure to spec.out and return (out path, structure)."""
    fig, layers_info = build_figure(spec)
    try:
        fig.savefig(spec.out, dpi=150, bbox_inches="tight")
    finally:
        plt.close(fig)
    return spec.out, layers_info
