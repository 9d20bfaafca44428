"""Named experiment grids: the attention matrix and the cumulative ladder.

Two canned studies share a common baseline:

* the attention matrix crosses module kind (CCAM, CBAM) with placement
  (backbone only, FPN only, both) against a no-attention base;
* the ablation ladder stacks improvements cumulatively: attention, then
  train-time augmentation, then anchors fitted to the corpus, then
  multi-scale feature fusion.

Rows that predate the anchor-fitting step keep the stock anchor scales and
ratios; the fitted rows replace them with the output of the evolutionary
search over the training corpus.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class ExperimentSpec:
    """One row of a study: a name plus config deltas from the base run."""

    name: str
    overrides: dict = field(default_factory=dict)
    optimize_anchors: bool = False

    def apply(self, resolved: dict) -> dict:
        out = {k: (dict(v) if isinstance(v, dict) else v) for k, v in resolved.items()}
        for dotted, value in self.overrides.items():
            keys = dotted.split(".")
            node = out
            for key in keys[:-1]:
                node[key] = dict(node[key])
                node = node[key]
            node[keys[-1]] = value
        return out


def attention_matrix() -> tuple[ExperimentSpec, ...]:
    """Base plus kind x placement, all other settings held fixed."""
    rows = [ExperimentSpec("base")]
    for kind in ("ccam", "cbam"):
        for placement, tag in (
            ("backbone_only", "backbone"),
            ("fpn_only", "fpn"),
            ("full", "full"),
        ):
            rows.append(
                ExperimentSpec(
                    f"{kind}-{tag}",
                    {
                        "attention.kind": kind,
                        "attention.placement": placement,
                    },
                )
            )
    return tuple(rows)


def ablation_ladder() -> tuple[ExperimentSpec, ...]:
    """Cumulative additions on top of the no-attention base."""
    cbam = {"attention.kind": "cbam", "attention.placement": "full"}
    aug = {**cbam, "train.augment": True}
    msff = {**aug, "msff.enabled": True}
    return (
        ExperimentSpec("base"),
        ExperimentSpec("cbam-full", cbam),
        ExperimentSpec("cbam-aug", aug),
        ExperimentSpec("cbam-aug-anch", aug, optimize_anchors=True),
        ExperimentSpec("cbam-aug-anch-msff", msff, optimize_anchors=True),
    )


def find_experiment(rows, name: str) -> ExperimentSpec:
    for spec in rows:
        if spec.name == name:
            return spec
    known = ", ".join(spec.name for spec in rows)
    raise KeyError(f"no experiment named {name!r} (known: {known})")
