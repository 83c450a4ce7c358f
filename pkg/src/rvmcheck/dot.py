"""Graphviz rendering of candidate executions.

One node per event, grouped into clusters per thread (initial writes float at
the top).  Translation reads are highlighted.  Edges shown: iio, po (adjacent
only, to keep graphs readable), rf, trf, co, fr, tfr, and the same-page
groupings as dotted undirected hints.
"""

from __future__ import annotations

from typing import List, Optional

from .candidates import Candidate
from .events import EventKind
from .models import ModelResult

_EDGE_STYLES = {
    "po": "color=black",
    "iio": "color=gray60, style=dashed",
    "rf": "color=red4",
    "trf": "color=orangered, style=bold",
    "co": "color=blue3",
    "fr": "color=darkgreen",
    "tfr": "color=seagreen, style=bold",
}


def _node_label(e) -> str:
    k = e.kind.name
    if e.kind is EventKind.T and e.faulting:
        k = "Tf"
    if e.is_iw:
        k = "IW"
    parts = [f"e{e.eid}: {k}"]
    if e.tlbi_kind is not None:
        parts[0] += f" {e.tlbi_kind.name}"
    if e.pa is not None:
        parts.append(f"pa=0x{e.pa:x}")
    if e.value is not None:
        parts.append(f"v=0x{e.value:x}")
    return "\\n".join(parts)


def _adjacent_po(cand: Candidate) -> List[tuple]:
    out = []
    by_thread = {}
    for e in cand.events_sorted():
        if e.thread is not None:
            by_thread.setdefault(e.thread, []).append(e.eid)
    for evs in by_thread.values():
        out.extend(zip(evs, evs[1:]))
    return out


def render_dot(cand: Candidate, result: Optional[ModelResult] = None) -> str:
    env = cand.relations()
    lines = ["digraph candidate {", '  rankdir="TB";',
             '  node [shape=box, fontsize=10];']
    cycle_edges = set()
    if result is not None and result.cycle:
        cyc = result.cycle
        cycle_edges = set(zip(cyc, cyc[1:] + cyc[:1]))

    iws = [e for e in cand.events_sorted() if e.thread is None]
    if iws:
        lines.append("  subgraph cluster_init {")
        lines.append('    label="initial"; style=dotted;')
        for e in iws:
            lines.append(f'    e{e.eid} [label="{_node_label(e)}"];')
        lines.append("  }")
    threads = sorted({e.thread for e in cand.events.values()
                      if e.thread is not None})
    for tid in threads:
        lines.append(f"  subgraph cluster_t{tid} {{")
        lines.append(f'    label="thread {tid}";')
        for e in cand.events_sorted():
            if e.thread != tid:
                continue
            style = ""
            if e.kind is EventKind.T:
                style = ", style=filled, fillcolor=lightyellow"
            if e.kind is EventKind.FAULT:
                style = ", style=filled, fillcolor=mistyrose"
            lines.append(f'    e{e.eid} [label="{_node_label(e)}"{style}];')
        lines.append("  }")

    def emit(name: str, pairs) -> None:
        style = _EDGE_STYLES[name]
        for a, b in sorted(pairs):
            extra = ", penwidth=2.5" if (a, b) in cycle_edges else ""
            lines.append(
                f'  e{a} -> e{b} [label="{name}", {style}{extra}];')

    emit("po", _adjacent_po(cand))
    emit("rf", env["rf"])
    emit("trf", env["trf"])
    emit("fr", env["fr"])
    emit("tfr", env["tfr"])
    co_adj = []
    for order in cand.co.values():
        co_adj.extend(zip(order, order[1:]))
    emit("co", co_adj)

    for name in ("same_va_page", "same_ipa_page"):
        seen = set()
        for a, b in sorted(env[name]):
            if a < b and (a, b) not in seen \
                    and cand.events[a].kind is EventKind.T \
                    and cand.events[b].kind is EventKind.T:
                seen.add((a, b))
        for a, b in sorted(seen):
            lines.append(f'  e{a} -> e{b} [dir=none, style=dotted, '
                         f'color=gray70, label="{name.replace("_", "-")}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
