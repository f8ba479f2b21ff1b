"""Dependency-free SVG line plots of NMSE (log scale) versus SNR."""

import math

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd",
            "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"]

_W, _H = 640, 480
_ML, _MR, _MT, _MB = 70, 20, 40, 50


def _series_label(row, multi_size: bool, multi_p: bool) -> str:
    label = row.algorithm
    if multi_size:
        label += f" {row.size_m}x{row.size_n}"
    if multi_p:
        label += f" p={row.p:g}"
    return label


def _xmap(x, x0, x1):
    span = (x1 - x0) or 1.0
    return _ML + (x - x0) / span * (_W - _ML - _MR)


def _ymap(logy, y0, y1):
    span = (y1 - y0) or 1.0
    return _H - _MB - (logy - y0) / span * (_H - _MT - _MB)


def plot_nmse_svg(rows, path, title: str):
    """One polyline per (algorithm, size, p) series; y axis is log10(NMSE)."""
    rows = [r for r in rows if r.nmse_mean > 0.0]
    if not rows:
        raise ValueError("nothing to plot: no rows with positive NMSE")
    multi_size = len({(r.size_m, r.size_n) for r in rows}) > 1
    multi_p = len({r.p for r in rows}) > 1
    series: dict = {}
    for r in rows:
        series.setdefault(_series_label(r, multi_size, multi_p), []).append(r)
    for pts in series.values():
        pts.sort(key=lambda r: r.snr_db)

    xs = [r.snr_db for r in rows]
    lys = [math.log10(r.nmse_mean) for r in rows]
    x0, x1 = min(xs), max(xs)
    y0 = math.floor(min(lys))
    y1 = math.ceil(max(lys))
    if y0 == y1:
        y0 -= 1

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
           f'viewBox="0 0 {_W} {_H}">',
           f'<rect width="{_W}" height="{_H}" fill="white"/>',
           f'<text x="{_W / 2:g}" y="24" text-anchor="middle" '
           f'font-family="sans-serif" font-size="16">{title}</text>']

    # frame
    out.append(f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" '
               f'height="{_H - _MT - _MB}" fill="none" stroke="black"/>')

    # y grid and labels at integer decades
    for d in range(y0, y1 + 1):
        y = _ymap(d, y0, y1)
        out.append(f'<line x1="{_ML}" y1="{y:.1f}" x2="{_W - _MR}" y2="{y:.1f}" '
                   f'stroke="#dddddd"/>')
        out.append(f'<text x="{_ML - 8}" y="{y + 4:.1f}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="12">1e{d}</text>')

    # x ticks at the sampled SNR values (thinned to at most 12)
    uniq_x = sorted({x for x in xs})
    stride = max(1, len(uniq_x) // 12)
    for x in uniq_x[::stride]:
        px = _xmap(x, x0, x1)
        out.append(f'<line x1="{px:.1f}" y1="{_H - _MB}" x2="{px:.1f}" '
                   f'y2="{_H - _MB + 5}" stroke="black"/>')
        out.append(f'<text x="{px:.1f}" y="{_H - _MB + 20}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="12">{x:g}</text>')

    out.append(f'<text x="{_W / 2:g}" y="{_H - 10}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="14">SNR (dB)</text>')
    out.append(f'<text x="18" y="{_H / 2:g}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="14" '
               f'transform="rotate(-90 18 {_H / 2:g})">NMSE</text>')

    for k, (label, pts) in enumerate(sorted(series.items())):
        color = _PALETTE[k % len(_PALETTE)]
        coords = " ".join(f"{_xmap(r.snr_db, x0, x1):.1f},"
                          f"{_ymap(math.log10(r.nmse_mean), y0, y1):.1f}"
                          for r in pts)
        out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" '
                   f'stroke-width="2"/>')
        ly = _MT + 16 + 16 * k
        out.append(f'<line x1="{_W - _MR - 150}" y1="{ly}" x2="{_W - _MR - 125}" '
                   f'y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{_W - _MR - 118}" y="{ly + 4}" '
                   f'font-family="sans-serif" font-size="12">{label}</text>')

    out.append("</svg>")
    with open(path, "w") as f:
        f.write("\n".join(out) + "\n")
