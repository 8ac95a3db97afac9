"""Self-contained SVG line charts from trajectory CSVs.

Output is byte-deterministic for identical input: fixed palette, fixed float
formatting, no timestamps or generator metadata.
"""

from __future__ import annotations

from pathlib import Path

from .harness import read_csv

WIDTH, HEIGHT = 860, 520
MARGIN = 60
PALETTE = (
    "#1b6ca8", "#d1495b", "#66a182", "#edae49", "#8d5a97",
    "#00798c", "#3c3c3b", "#c97b63", "#7a9e7e", "#2e4057",
)


def _float(value: str):
    try:
        return float(value)
    except ValueError:
        return None


def _series_groups(cols: dict[str, list[str]], columns):
    """One (label, xs, ys) series per run per requested column."""
    for name in columns:
        if name not in cols:
            raise KeyError(f"column {name!r} not present in CSV (has {sorted(cols)})")
    n_rows = len(next(iter(cols.values()), []))
    if "run_id" in cols and "seed" in cols:
        keys = [f"{cols['run_id'][i]}/s{cols['seed'][i]}" for i in range(n_rows)]
    else:
        keys = [""] * n_rows
    x_col = cols.get("iteration") or cols.get("step") or [str(i) for i in range(n_rows)]
    groups = []
    for col in columns:
        per_key: dict[str, tuple[list, list]] = {}
        for i in range(n_rows):
            y = _float(cols[col][i])
            x = _float(x_col[i])
            if y is None or x is None:
                continue
            xs, ys = per_key.setdefault(keys[i], ([], []))
            xs.append(x)
            ys.append(y)
        for key in sorted(per_key):
            label = f"{col} {key}".strip()
            groups.append((label, *per_key[key]))
    return groups


def emit_svg(csv_in, columns, out_path) -> Path:
    """Write a line chart of the named columns; one polyline per run per column."""
    cols = read_csv(csv_in)
    groups = _series_groups(cols, list(columns))

    all_x = [x for _, xs, _ in groups for x in xs]
    all_y = [y for _, _, ys in groups for y in ys]
    x_lo, x_hi = (min(all_x), max(all_x)) if all_x else (0.0, 1.0)
    y_lo, y_hi = (min(all_y), max(all_y)) if all_y else (0.0, 1.0)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0

    def sx(x):
        return MARGIN + (x - x_lo) / (x_hi - x_lo) * (WIDTH - 2 * MARGIN)

    def sy(y):
        return HEIGHT - MARGIN - (y - y_lo) / (y_hi - y_lo) * (HEIGHT - 2 * MARGIN)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" '
        f'y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<text x="{MARGIN}" y="{HEIGHT - MARGIN + 18}" font-size="11">{x_lo:.6g}</text>',
        f'<text x="{WIDTH - MARGIN}" y="{HEIGHT - MARGIN + 18}" font-size="11" '
        f'text-anchor="end">{x_hi:.6g}</text>',
        f'<text x="{MARGIN - 6}" y="{HEIGHT - MARGIN}" font-size="11" '
        f'text-anchor="end">{y_lo:.6g}</text>',
        f'<text x="{MARGIN - 6}" y="{MARGIN + 4}" font-size="11" text-anchor="end">{y_hi:.6g}</text>',
    ]
    for idx, (label, xs, ys) in enumerate(groups):
        color = PALETTE[idx % len(PALETTE)]
        points = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{points}"/>'
        )
        ly = MARGIN + 14 * idx
        parts.append(
            f'<line x1="{WIDTH - MARGIN - 110}" y1="{ly}" x2="{WIDTH - MARGIN - 90}" '
            f'y2="{ly}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{WIDTH - MARGIN - 84}" y="{ly + 4}" font-size="11">{label}</text>'
        )
    parts.append("</svg>")
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text("\n".join(parts) + "\n")
    return out_path
