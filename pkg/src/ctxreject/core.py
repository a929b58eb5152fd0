"""Shared domain types: label bookkeeping, cost matrices, run configuration.

Everything in this module is immutable after construction and safe to share
across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np


class ConfigError(ValueError):
    """Invalid parameter or configuration file (CLI exit code 2)."""

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = list(violations or [])


class DataError(ValueError):
    """Malformed or inconsistent input data (CLI exit code 3)."""


class NumericalError(RuntimeError):
    """Numerical failure such as a non-finite objective (CLI exit code 4)."""


@dataclass(frozen=True)
class LabelSet:
    """Class labels 1..N, their superclass grouping, and the reject label N+1.

    ``superclass_of`` maps each class index to its superclass index.  The
    default groups every class into its own superclass.
    """

    num_classes: int
    superclass_of: dict = field(default=None)

    def __post_init__(self):
        if self.num_classes < 1:
            raise ConfigError("num_classes must be >= 1")
        sc = self.superclass_of
        if sc is None:
            sc = {c: c for c in range(1, self.num_classes + 1)}
        else:
            sc = dict(sc)
            if sorted(sc) != list(range(1, self.num_classes + 1)):
                raise ConfigError(
                    "superclass_of must assign exactly the classes 1..N")
        object.__setattr__(self, "superclass_of", sc)

    @property
    def reject_label(self) -> int:
        return self.num_classes + 1

    @property
    def classes(self) -> range:
        return range(1, self.num_classes + 1)

    def same_superclass(self, a: int, b: int) -> bool:
        """True when both labels are classes belonging to one superclass."""
        if a == self.reject_label or b == self.reject_label:
            return False
        return self.superclass_of[a] == self.superclass_of[b]

    @property
    def num_superclasses(self) -> int:
        return len(set(self.superclass_of.values()))


@dataclass(frozen=True)
class CostMatrix:
    """(N+1) x N decision costs: rows are decided labels, columns true classes.

    The top N x N block has a zero diagonal, ``g`` within a superclass and 1
    otherwise; the last row is the constant rejection cost ``rho``.
    """

    entries: np.ndarray
    g: float
    rho: float

    @property
    def num_classes(self) -> int:
        return self.entries.shape[1]


def build_cost_matrix(labels: LabelSet, g: float, rho: float) -> CostMatrix:
    """Construct the misclassification/rejection cost matrix.

    Costs live in [0, 1] so that expected risks stay comparable to ``rho``.
    """
    if not 0.0 <= g <= 1.0:
        raise ConfigError(f"superclass cost g={g} out of [0,1]")
    if not 0.0 <= rho <= 1.0:
        raise ConfigError(f"rejection cost rho={rho} out of [0,1]")
    n = labels.num_classes
    entries = np.ones((n + 1, n), dtype=float)
    for j1 in labels.classes:
        for j2 in labels.classes:
            if j1 == j2:
                entries[j1 - 1, j2 - 1] = 0.0
            elif labels.same_superclass(j1, j2):
                entries[j1 - 1, j2 - 1] = g
    entries[n, :] = rho
    entries.setflags(write=False)
    return CostMatrix(entries=entries, g=g, rho=rho)


def is_metric(psi_c: float, psi_r: float) -> bool:
    """Whether the pairwise interaction function is a metric on the labels.

    The interaction takes the value 0 on equal labels, ``psi_c`` between
    classes of one superclass, ``psi_r`` when one side is the reject label
    and 1 otherwise.  Symmetry is structural; a metric additionally needs
    strictly positive off-diagonal values and the triangle inequality.
    Routing any class-to-class transition through the reject label gives the
    binding constraints: 1 <= 2*psi_r and psi_c <= 2*psi_r.
    """
    return psi_c > 0.0 and psi_r > 0.0 and 2.0 * psi_r >= 1.0 and psi_c <= 2.0 * psi_r


# Default parameter values follow the empirical operating point reported for
# the H&E experiments; they are overridable through the config file.
@dataclass(frozen=True)
class PipelineConfig:
    """Flat bag of every tunable in the pipeline, one source of truth.

    Serialized as a ``key = value`` text file and echoed into output
    artifacts for provenance.
    """

    alpha: float = 0.58             # contextual index in [0,1]
    rho: float = 0.46               # rejection threshold in [0,1]
    lam: float = 10.0               # l1 sparsity weight, file key "lambda"
    gamma: float = 0.05             # edge-weight scale > 0
    v_intrascale: float = 1.0
    v_interscale: float = 4.0
    psi_c: float = 0.7              # same-superclass transition discount
    psi_r: float = 0.5              # reject transition discount
    g: float = 0.7                  # same-superclass misclassification cost
    mss_list: tuple = (100, 200, 400, 800, 1600, 3200)
    seed: int = 0
    seg_k: float = 300.0 / 255.0    # merge threshold constant, [0,1] intensities
    seg_sigma: float = 0.8          # Gaussian pre-smoothing
    w_min: float = 0.0              # edge prune threshold, 0 disables pruning
    num_classes: int = 0            # 0 = infer from training data / truth
    superclasses: tuple = ()        # per-class superclass ids, () = singletons
    application_features: str = "rgb"
    metrics_base: str = "context"   # base labels: "context" (rho=1) | "contextfree"
    risk_floor: float = 1e-12
    lorsal_max_outer: int = 100
    lorsal_tol: float = 1e-7
    lorsal_mu: float = 1.0
    lorsal_max_inner: int = 200
    lorsal_inner_tol: float = 1e-6
    expansion_max_cycles: int = 10

    def violations(self) -> list:
        """Named invariant violations; empty when the config is valid."""
        errs = []
        if not 0.0 <= self.alpha <= 1.0:
            errs.append("alpha out of [0,1]")
        if not 0.0 <= self.rho <= 1.0:
            errs.append("rho out of [0,1]")
        if self.lam < 0.0:
            errs.append("lambda must be >= 0")
        if not self.gamma > 0.0:
            errs.append("gamma must be > 0")
        if self.v_intrascale < 0.0:
            errs.append("v_intrascale must be >= 0")
        if self.v_interscale < 0.0:
            errs.append("v_interscale must be >= 0")
        if not 0.0 <= self.psi_c <= 1.0:
            errs.append("psi_c out of [0,1]")
        if not 0.0 <= self.psi_r <= 1.0:
            errs.append("psi_r out of [0,1]")
        if not 0.0 <= self.g <= 1.0:
            errs.append("g out of [0,1]")
        if len(self.mss_list) == 0:
            errs.append("mss_list empty")
        elif any(b <= a for a, b in zip(self.mss_list, self.mss_list[1:])):
            errs.append("mss_list not increasing")
        if any(m < 1 for m in self.mss_list):
            errs.append("mss_list entries must be >= 1")
        if not is_metric(self.psi_c, self.psi_r):
            errs.append("(psi_c, psi_r) interaction is not metric")
        if self.w_min < 0.0:
            errs.append("w_min must be >= 0")
        if self.num_classes < 0:
            errs.append("num_classes must be >= 0")
        if self.superclasses and self.num_classes and \
                len(self.superclasses) != self.num_classes:
            errs.append("superclasses length must equal num_classes")
        if self.metrics_base not in ("context", "contextfree"):
            errs.append("metrics_base must be 'context' or 'contextfree'")
        if not self.risk_floor > 0.0:
            errs.append("risk_floor must be > 0")
        if self.lorsal_max_outer < 1:
            errs.append("lorsal_max_outer must be >= 1")
        if not self.lorsal_tol >= 0.0:
            errs.append("lorsal_tol must be >= 0")
        if not self.lorsal_mu > 0.0:
            errs.append("lorsal_mu must be > 0")
        if self.lorsal_max_inner < 1:
            errs.append("lorsal_max_inner must be >= 1")
        if self.expansion_max_cycles < 1:
            errs.append("expansion_max_cycles must be >= 1")
        return errs

    def label_set(self, inferred_num_classes: int = 0) -> LabelSet:
        """Build the LabelSet, falling back to inferred N and singletons."""
        n = self.num_classes or inferred_num_classes
        if n < 1:
            raise ConfigError("number of classes unknown: set num_classes or "
                              "provide labeled data")
        if self.superclasses:
            if len(self.superclasses) != n:
                raise ConfigError(
                    f"superclasses has {len(self.superclasses)} entries for "
                    f"{n} classes")
            sc = {c: int(s) for c, s in enumerate(self.superclasses, start=1)}
        else:
            sc = None
        return LabelSet(num_classes=n, superclass_of=sc)


def validate_config(cfg: PipelineConfig) -> PipelineConfig:
    """Return ``cfg`` unchanged if valid, else raise with all violations."""
    errs = cfg.violations()
    if errs:
        raise ConfigError("invalid configuration: " + "; ".join(errs), errs)
    return cfg


# config-file key <-> dataclass field; "lambda" keeps the conventional name
# without colliding with the Python keyword.
_KEY_TO_FIELD = {"lambda": "lam"}
_FIELD_TO_KEY = {"lam": "lambda"}


def _parse_value(field_type, raw: str):
    raw = raw.strip()
    if field_type is float:
        return float(raw)
    if field_type is int:
        return int(raw)
    if field_type is str:
        return raw
    if field_type is tuple:
        if raw in ("", "()"):
            return ()
        return tuple(int(tok) for tok in raw.replace(",", " ").split())
    raise ConfigError(f"unsupported config field type {field_type}")


def parse_config_text(text: str) -> PipelineConfig:
    """Parse the flat ``key = value`` config format; unknown keys are errors."""
    by_name = {f.name: f for f in fields(PipelineConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"config line {lineno}: expected 'key = value', "
                              f"got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        name = _KEY_TO_FIELD.get(key, key)
        if name not in by_name:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        if name in values:
            raise ConfigError(f"config line {lineno}: duplicate key {key!r}")
        try:
            values[name] = _parse_value(_FIELD_TYPES[name], raw)
        except ValueError as exc:
            raise ConfigError(f"config line {lineno}: bad value for {key!r}: "
                              f"{exc}") from exc
    return validate_config(PipelineConfig(**values))


# dataclass field types are strings under `from __future__ import annotations`;
# resolve them once here.
_FIELD_TYPES = {
    f.name: {"float": float, "int": int, "str": str, "tuple": tuple}[f.type]
    for f in fields(PipelineConfig)
}


def load_config(path) -> PipelineConfig:
    return parse_config_text(Path(path).read_text())


def config_to_text(cfg: PipelineConfig) -> str:
    """Serialize back to the flat file format (provenance echo)."""
    lines = []
    for f in fields(PipelineConfig):
        key = _FIELD_TO_KEY.get(f.name, f.name)
        val = getattr(cfg, f.name)
        if isinstance(val, tuple):
            val = ", ".join(str(v) for v in val)
        lines.append(f"{key} = {val}")
    return "\n".join(lines) + "\n"


def config_to_dict(cfg: PipelineConfig) -> dict:
    out = {}
    for f in fields(PipelineConfig):
        key = _FIELD_TO_KEY.get(f.name, f.name)
        val = getattr(cfg, f.name)
        out[key] = list(val) if isinstance(val, tuple) else val
    return out
