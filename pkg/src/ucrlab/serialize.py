"""JSON/CSV persistence: input specs, run descriptors, and run manifests.

All files are UTF-8. JSON is written sorted and indented so identical
payloads serialize byte-identically; CSV follows RFC 4180 (CRLF rows,
quoting only where needed) with floats rendered by repr for lossless
round-trips. Parse failures carry file/line/column context.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ValidationError
from .channelcap import MixedChannel, DmcProduct, bec, bsc
from .probspace import ConditionalPmf, JointPmf, Pmf
from .ucrcap import AuxiliaryChannel

SCHEMA_VERSION = 1

__all__ = [
    "SCHEMA_VERSION",
    "load_json",
    "write_json",
    "write_csv",
    "source_from_dict",
    "source_to_dict",
    "pmf_from_dict",
    "channel_from_dict",
    "aux_from_dict",
    "RunManifest",
]


def load_json(path) -> dict:
    """Parse a UTF-8 JSON file; errors carry path:line:column."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(
            f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: top-level JSON value must be an object")
    return data


def write_json(path, obj) -> None:
    """Deterministic JSON dump: sorted keys, two-space indent, trailing \\n."""
    Path(path).write_text(
        json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n",
        encoding="utf-8")


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header: list[str], rows) -> None:
    """RFC 4180 CSV with a header row; floats via repr."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="")


def _need(d: dict, key: str, what: str):
    if key not in d:
        raise ValidationError(f"{what}: missing required key {key!r}")
    return d[key]


def source_from_dict(d: dict) -> JointPmf:
    """{alphabet_x, alphabet_y, probs row-major} -> joint source law."""
    nx = int(_need(d, "alphabet_x", "source spec"))
    ny = int(_need(d, "alphabet_y", "source spec"))
    probs = np.asarray(_need(d, "probs", "source spec"), dtype=float)
    if probs.ndim == 1:
        if probs.size != nx * ny:
            raise ValidationError(
                f"source spec: probs has {probs.size} entries, need {nx * ny}")
        probs = probs.reshape(nx, ny)
    elif probs.shape != (nx, ny):
        raise ValidationError(
            f"source spec: probs shape {probs.shape} does not match "
            f"({nx}, {ny})")
    return JointPmf(probs)


def source_to_dict(j: JointPmf) -> dict:
    return {
        "alphabet_x": j.nx,
        "alphabet_y": j.ny,
        "probs": [float(v) for v in j.probs.ravel()],
    }


def pmf_from_dict(d: dict) -> Pmf:
    """{probs: [...]} -> pmf."""
    return Pmf(np.asarray(_need(d, "probs", "pmf spec"), dtype=float))


def channel_from_dict(d: dict) -> ConditionalPmf | MixedChannel:
    """{kind, payload} -> single-letter kernel or block mixture.

    Kinds: dmc (payload {rows}), bsc (payload {p}), bec (payload {e}),
    mixed (payload {components: [{weight, channel}, ...]}).
    """
    kind = _need(d, "kind", "channel spec")
    payload = _need(d, "payload", "channel spec")
    if not isinstance(payload, dict):
        raise ValidationError("channel spec: payload must be an object")
    if kind == "dmc":
        rows = np.asarray(_need(payload, "rows", "dmc payload"), dtype=float)
        if rows.ndim != 2:
            raise ValidationError("dmc payload: rows must be a 2-D matrix")
        return ConditionalPmf(rows)
    if kind == "bsc":
        return bsc(float(_need(payload, "p", "bsc payload")))
    if kind == "bec":
        return bec(float(_need(payload, "e", "bec payload")))
    if kind == "mixed":
        comps = _need(payload, "components", "mixed payload")
        if not isinstance(comps, list) or not comps:
            raise ValidationError("mixed payload: components must be a non-empty list")
        pairs = []
        for comp in comps:
            w = float(_need(comp, "weight", "mixed component"))
            sub = channel_from_dict(_need(comp, "channel", "mixed component"))
            if isinstance(sub, MixedChannel):
                raise ValidationError("mixed components cannot nest mixtures")
            pairs.append((w, DmcProduct(sub)))
        return MixedChannel(tuple(pairs))
    raise ValidationError(f"channel spec: unknown kind {kind!r}")


def aux_from_dict(d: dict, x_card: int) -> AuxiliaryChannel:
    """{kind: identity|constant|matrix, ...} -> auxiliary channel on X."""
    kind = _need(d, "kind", "aux spec")
    if kind == "identity":
        u_card = int(d.get("u_card", x_card))
        return AuxiliaryChannel.identity(x_card, u_card)
    if kind == "constant":
        return AuxiliaryChannel.constant(x_card, int(d.get("u_card", 1)))
    if kind == "matrix":
        rows = np.asarray(_need(d, "rows", "aux spec"), dtype=float)
        aux = AuxiliaryChannel.from_matrix(rows)
        if aux.x_card != x_card:
            raise ValidationError(
                f"aux spec: matrix has {aux.x_card} input rows, source has "
                f"{x_card} symbols")
        return aux
    raise ValidationError(f"aux spec: unknown kind {kind!r}")


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce one CLI run byte-for-byte.

    config embeds the fully resolved inputs (parsed spec contents, not
    file paths), so replay does not depend on the original files still
    existing. duration_seconds is informational and excluded from the
    reproducibility contract.
    """

    command: str
    config: dict
    seed: int
    outputs: dict[str, str]
    duration_seconds: float
    tool_version: str = __version__
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "tool_version": self.tool_version,
            "command": self.command,
            "seed": self.seed,
            "config": self.config,
            "outputs": self.outputs,
            "duration_seconds": self.duration_seconds,
        }

    def write(self, path) -> None:
        write_json(path, self.to_dict())

    @staticmethod
    def load(path) -> "RunManifest":
        d = load_json(path)
        version = _need(d, "schema_version", "manifest")
        if version != SCHEMA_VERSION:
            raise ValidationError(
                f"manifest schema_version {version} unsupported "
                f"(this build reads {SCHEMA_VERSION})")
        return RunManifest(
            command=str(_need(d, "command", "manifest")),
            config=_need(d, "config", "manifest"),
            seed=int(_need(d, "seed", "manifest")),
            outputs=dict(d.get("outputs", {})),
            duration_seconds=float(d.get("duration_seconds", 0.0)),
            tool_version=str(d.get("tool_version", __version__)),
        )
