"""Layer-by-layer architecture summaries (CSV and aligned text)."""
import csv
import io
import re
from dataclasses import dataclass
from typing import List, Optional

from network.graph import LayerGraph
from network.layers import ConvBlock, FireModule, Junction, SkipSource

CSV_HEADER = ["layer", "map", "depth", "s1x1", "e1x1", "e3x3", "param"]


@dataclass
class SummaryRow:
    layer: str
    map: str
    depth: Optional[int] = None
    s1x1: Optional[int] = None
    e1x1: Optional[int] = None
    e3x3: Optional[int] = None
    param: int = 0
    count: int = 1  # identical consecutive modules folded into this row

    @property
    def total(self) -> int:
        return self.param * self.count

    def cells(self) -> List[str]:
        values = [self.layer, self.map, self.depth, self.s1x1, self.e1x1, self.e3x3,
                  self.param if self.param or self.depth else None]
        return ["" if v is None else str(v) for v in values]


def _split_name(name: str):
    match = re.fullmatch(r"([a-z]+)(\d+)", name)
    return (match.group(1), int(match.group(2))) if match else (name, None)


def _signature(layer):
    if isinstance(layer, FireModule):
        return ("fire", layer.in_channels, layer.s1x1, layer.e1x1, layer.e3x3)
    if isinstance(layer, ConvBlock):
        return ("conv", layer.in_channels, layer.out_channels, layer.kernel_size)
    return None


def summarize(graph: LayerGraph, input_size: int = 500) -> List[SummaryRow]:
    """One row per displayed entry; runs of identical modules share a row ('fm 2~4')."""
    size = input_size
    rows = [SummaryRow("input", f"{size}x{size}x{graph.in_channels}")]
    group = None  # (prefix, first number, signature)
    for layer in graph.layers:
        if isinstance(layer, SkipSource):
            continue
        size = size // 2 if layer.scale < 0 else size * 2 if layer.scale > 0 else size
        prefix, number = _split_name(layer.name)
        signature = _signature(layer)
        map_size = f"{size}x{size}x{layer.out_channels}"
        param = sum(p.size for p in layer.param_specs())

        if signature is not None and group is not None and group[0] == prefix and group[2] == signature:
            row = rows[-1]
            row.count += 1
            row.layer = f"{prefix} {group[1]}~{number}"
            continue

        group = (prefix, number, signature) if signature is not None else None
        label = layer.name if number is None else f"{prefix} {number}"
        row = SummaryRow(label, map_size, param=param)
        if isinstance(layer, FireModule):
            row.depth, row.s1x1, row.e1x1, row.e3x3 = layer.depth, layer.s1x1, layer.e1x1, layer.e3x3
        elif not isinstance(layer, Junction):
            row.depth = layer.depth
        rows.append(row)
    return rows


def total_params(rows: List[SummaryRow]) -> int:
    return sum(row.total for row in rows)


def to_csv(rows: List[SummaryRow]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(row.cells())
    return buffer.getvalue()


def to_text(rows: List[SummaryRow]) -> str:
    table = [[h if h != "map" else "map size" for h in CSV_HEADER]] + [row.cells() for row in rows]
    widths = [max(len(r[i]) for r in table) for i in range(len(CSV_HEADER))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in table]
    lines.insert(1, "  ".join("-" * w for w in widths))
    lines.append(f"total params: {total_params(rows):,}")
    return "\n".join(lines)
