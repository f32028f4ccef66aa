"""Binary model checkpoints for classifiers and policies.

Checkpoint layout (little-endian):

    magic    4 bytes  b"MODL"
    version  1 byte   0x01
    meta_len u32      byte length of the metadata block
    metadata UTF-8 JSON object; always carries "kind" ("classifier" or
             "policy"), "d_in", "hidden", "n_out", and "seed", plus a config
             echo and task-specific fields (class weights, variant, ...)
    count    u64      number of float64 parameters
    params   count float64 values in canonical order
             (w1 row-major, b1, w2 row-major, b2)

A varying-parameter dual policy is stored as two policy checkpoints plus a
small text manifest: lines "disease\\t<relative-path>" and
"severity\\t<relative-path>".
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .classifiers import MlpParams
from .errors import ArtifactError
from .policy import PolicyParams

MAGIC = b"MODL"
VERSION = 1
KINDS = ("classifier", "policy")
DUAL_ROLES = ("disease", "severity")


def save_checkpoint(path, params: MlpParams, kind: str, metadata: dict | None = None) -> None:
    """Write one parameter block with its metadata."""
    if kind not in KINDS:
        raise ValueError(f"unknown checkpoint kind {kind!r}")
    meta = dict(metadata or {})
    meta.update(
        {"kind": kind, "d_in": params.d_in, "hidden": params.hidden, "n_out": params.n_out}
    )
    meta.setdefault("seed", 0)
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    flat = params.to_flat()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<BI", VERSION, len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<Q", flat.size))
        fh.write(flat.astype("<f8").tobytes())


def load_checkpoint(path) -> tuple[MlpParams, dict]:
    """Read a checkpoint back; bad magic, truncation, or size mismatch is rejected."""
    raw = Path(path).read_bytes()
    if len(raw) < 4 or raw[:4] != MAGIC:
        raise ArtifactError(f"{path}: bad magic {raw[:4]!r}, expected {MAGIC!r}")
    if len(raw) < 9:
        raise ArtifactError(f"{path}: truncated header")
    version, meta_len = struct.unpack("<BI", raw[4:9])
    if version != VERSION:
        raise ArtifactError(f"{path}: unsupported version {version}")
    if len(raw) < 9 + meta_len + 8:
        raise ArtifactError(f"{path}: truncated metadata")
    try:
        meta = json.loads(raw[9 : 9 + meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ArtifactError(f"{path}: unreadable metadata ({exc})") from exc
    (count,) = struct.unpack("<Q", raw[9 + meta_len : 17 + meta_len])
    expected = 17 + meta_len + 8 * count
    if len(raw) != expected:
        raise ArtifactError(f"{path}: expected {expected} bytes, found {len(raw)}")
    flat = np.frombuffer(raw, dtype="<f8", count=count, offset=17 + meta_len).astype(float)
    for key in ("kind", "d_in", "hidden", "n_out"):
        if key not in meta:
            raise ArtifactError(f"{path}: metadata lacks {key!r}")
    d_in, hidden, n_out = int(meta["d_in"]), int(meta["hidden"]), int(meta["n_out"])
    if count != d_in * hidden + hidden + hidden * n_out + n_out:
        raise ArtifactError(f"{path}: parameter count {count} inconsistent with dimensions")
    cls = PolicyParams if meta["kind"] == "policy" else MlpParams
    template = cls(
        np.zeros((hidden, d_in)), np.zeros(hidden), np.zeros((n_out, hidden)), np.zeros(n_out)
    )
    return template.with_flat(flat), meta


def save_dual_checkpoint(path, dual, metadata: dict | None = None) -> None:
    """Write the two sub-policies beside `path` plus the pointer manifest at `path`."""
    path = Path(path)
    meta = dict(metadata or {})
    lines = []
    for role in DUAL_ROLES:
        rel = f"{path.name}.{role}"
        sub = getattr(dual, f"{role}_policy")
        save_checkpoint(path.parent / rel, sub, "policy", {**meta, "role": role})
        lines.append(f"{role}\t{rel}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_policy_artifact(path) -> tuple[object, dict]:
    """Load either a single policy checkpoint or a dual-policy manifest."""
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] == MAGIC:
        params, meta = load_checkpoint(path)
        if meta.get("kind") != "policy":
            raise ArtifactError(f"{path}: checkpoint kind {meta.get('kind')!r} is not a policy")
        return params, meta
    from .variants import DualPolicyParams

    roles = {}
    meta = {}
    for lineno, line in enumerate(raw.decode("utf-8", errors="replace").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2 or parts[0] not in DUAL_ROLES:
            raise ArtifactError(f"{path}:{lineno}: not a checkpoint or dual-policy manifest")
        sub, sub_meta = load_checkpoint(path.parent / parts[1])
        if sub_meta.get("kind") != "policy":
            raise ArtifactError(f"{path}: sub-checkpoint {parts[1]} is not a policy")
        roles[parts[0]] = sub
        meta = sub_meta
    if set(roles) != set(DUAL_ROLES):
        raise ArtifactError(f"{path}: dual manifest must name both {DUAL_ROLES}")
    meta = dict(meta)
    meta["variant"] = meta.get("variant", "varying")
    return DualPolicyParams(roles["disease"], roles["severity"]), meta
