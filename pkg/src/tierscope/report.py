"""Text renderings: region glyph panels in DOT, membership and comparison tables."""

from __future__ import annotations

import csv
import io

from .workflow import SINK, SOURCE

FILLED = "●"
EMPTY = "○"


def _q(s):
    return '"' + str(s).replace("\\", "\\\\").replace('"', '\\"') + '"'


def glyph(admissible, catalog):
    """One marker per catalog tier (fastest first), filled when the tier is admissible."""
    allowed = set(admissible)
    return "".join(FILLED if t in allowed else EMPTY for t in catalog.names)


def regions_dot(model, template, top_k=5):
    """Render the DAG once per top-k region, stages labelled with their tier glyph."""
    cat = template.catalog
    lines = [
        "digraph regions {",
        "  rankdir=LR;",
        '  node [shape=box, fontname="monospace"];',
        f"  legend [shape=note, label={_q('markers: ' + ' > '.join(cat.names))}];",
    ]
    for r in model.regions[:top_k]:
        p = f"r{r.index}"
        label = f"region {r.index} | median {r.median:.6g} s | n={r.size}"
        lines.append(f"  subgraph cluster_{p} {{")
        lines.append(f"    label={_q(label)};")
        lines.append(f"    {_q(p + '_' + SOURCE)} [shape=ellipse, label={_q('source ' + template.initial_data_tier)}];")
        lines.append(f"    {_q(p + '_' + SINK)} [shape=ellipse, label={_q('sink ' + template.final_data_tier)}];")
        for s in sorted(template.stages, key=lambda s: (s.level, s.name)):
            allowed = r.rule.get(s.name, s.tiers)
            lab = f"{s.name}\\n{glyph(allowed, cat)}"
            lines.append(f'    {_q(p + "_" + s.name)} [label="{lab}"];')
        for e in template.edges:
            lines.append(f"    {_q(p + '_' + e.src)} -> {_q(p + '_' + e.dst)};")
        lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"


def membership_csv(model, configs=None):
    makespan = {c.index: c.makespan for c in configs} if configs is not None else {}
    rows = []
    for r in model.regions:
        for m, y in zip(r.members, r.makespans):
            rows.append((m, r.index, makespan.get(m, y)))
    rows.sort()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["config_index", "region_index", "makespan_s"])
    for m, reg, y in rows:
        w.writerow([m, reg, repr(y)])
    return buf.getvalue()


def compare_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["policy", "pc", "pct_worse_than_region_model"])
    for name, pc, gap in rows:
        w.writerow([name, "n/a" if pc is None else f"{pc:.6f}", "" if gap is None else f"{gap:.2f}"])
    return buf.getvalue()


def epsilon_csv(checks):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["region_index", "passes", "spread"])
    for c in checks:
        w.writerow([c.region, int(c.passes), repr(c.spread)])
    return buf.getvalue()


def cost_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["region_index", "median_makespan_s", "shared_io_share", "local_io_share", "movement_share"])
    for idx, med, (a, b, c) in rows:
        w.writerow([idx, repr(med), f"{a:.6f}", f"{b:.6f}", f"{c:.6f}"])
    return buf.getvalue()
