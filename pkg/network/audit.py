"""Parameter audit against the published Micro-Net counts."""
from dataclasses import dataclass
from typing import Dict, List, Optional

from network.architecture import build_architecture, preset
from network.summary import summarize, total_params

# Published per-module counts of the Micro-Net dimension table.
PUBLISHED_MICRO_ROWS: Dict[str, int] = {
    "fm 1": 5158,
    "fm 2~4": 6144,
    "fm 5": 22528,
    "fm 6~8": 24576,
    "fm 9": 90112,
    "fm 10~12": 98304,
    "dfm 9~7": 98304,
    "dec 1": 131072,
    "dfm 6~4": 24576,
    "dec 2": 32768,
    "dfm 3~1": 6144,
    "conv": 128,
}

# Published totals in millions of parameters.
PUBLISHED_TOTALS_M: Dict[str, float] = {
    "unet": 31.02,
    "bm1": 5.36,
    "bm2": 0.93,
    "bm3": 0.93,
    "bm3-mixed": 0.93,
    "micro": 1.06,
    "micro-deep": 1.18,
}

# Totals that follow from an under-specified layout are reported, not asserted.
INTERPRETED = {
    "bm1": "decoder widths and up-convolutions are not published; built as a fire-module "
           "mirror of U-Net with 2x2 deconvolutions and concat bypasses",
}


@dataclass
class RowCheck:
    layer: str
    computed: int
    published: int

    @property
    def matches(self) -> bool:
        return self.computed == self.published


@dataclass
class VariantCheck:
    name: str
    params: int
    published_m: Optional[float]
    note: Optional[str] = None

    @property
    def millions(self) -> float:
        return round(self.params / 1e6, 2)

    @property
    def matches(self) -> Optional[bool]:
        if self.published_m is None or self.note:
            return None
        return self.millions == self.published_m


def audit_micro_rows() -> List[RowCheck]:
    rows = summarize(build_architecture(preset("micro")))
    by_name = {row.layer: row for row in rows}
    return [RowCheck(name, by_name[name].param, published)
            for name, published in PUBLISHED_MICRO_ROWS.items()]


def audit_variants() -> List[VariantCheck]:
    checks = []
    for name, published in PUBLISHED_TOTALS_M.items():
        graph = build_architecture(preset(name))
        checks.append(VariantCheck(name, graph.count_params(), published, INTERPRETED.get(name)))
    return checks


def compression_ratio(baseline: int, compact: int) -> float:
    return baseline / compact


def audit_report() -> str:
    """Human-readable audit: per-row table check, variant totals, compression ratio."""
    lines = ["Micro-Net per-layer audit"]
    for check in audit_micro_rows():
        status = "ok" if check.matches else f"MISMATCH (published {check.published})"
        lines.append(f"  {check.layer:<9} {check.computed:>8}  {status}")
        if not check.matches and check.layer == "fm 1":
            lines.append("            closed form 3*16 + 16*32 + 16*32*9 = 5168; "
                         "the published 5158 is inconsistent with every other row")
    micro_rows = summarize(build_architecture(preset("micro")))
    lines.append(f"  total     {total_params(micro_rows):>8,}")
    lines.append("")
    lines.append("Variant totals")
    counts = {}
    for check in audit_variants():
        counts[check.name] = check.params
        if check.matches is None:
            status = f"reported only: {check.note}"
        else:
            status = "ok" if check.matches else "MISMATCH"
        lines.append(f"  {check.name:<11} {check.params:>11,}  {check.millions:>6.2f}M "
                     f"(published {check.published_m:.2f}M)  {status}")
    lines.append("")
    ratio = compression_ratio(counts["unet"], counts["micro"])
    lines.append(f"Compression U-Net / Micro-Net: {ratio:.2f}x")
    return "\n".join(lines)
