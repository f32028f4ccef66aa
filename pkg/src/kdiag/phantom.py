"""Synthetic labeled subjects: generation, binary serialization, and manifests.

A subject is a small real-valued phantom (elliptical anatomy with smooth
texture and pixel noise), its k-space, a binary disease label, and a severity
label defined only for diseased subjects. Diseased phantoms carry one round
lesion whose radius and contrast come from disjoint low/high bands, so
severity is learnable without being readable from a single pixel.

Subject file layout (little-endian):

    magic   4 bytes  b"KSPC"
    version 1 byte   0x01
    rows    u32
    cols    u32
    g_d     u8       0 or 1
    g_s     u8       0, 1, or 255 (255 = not applicable, required iff g_d = 0)
    image   rows*cols complex values, interleaved float64 (re, im), row-major
    kspace  rows*cols complex values, same encoding

The manifest is UTF-8 text: a comment block echoing the generator config
(# key = value), then one record per line, "<split>\\t<relative-path>".
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import ArtifactError
from .kspace import dft2

MAGIC = b"KSPC"
VERSION = 1
NA_BYTE = 255
SPLITS = ("train", "val", "test")


@dataclass(eq=False)
class Subject:
    """One labeled slice: real phantom stored as complex, its k-space, and labels."""

    image: np.ndarray
    kspace: np.ndarray
    g_d: int
    g_s: int | None

    def __post_init__(self):
        if self.g_d not in (0, 1):
            raise ValueError("g_d must be 0 or 1")
        if (self.g_s is None) != (self.g_d == 0):
            raise ValueError("g_s must be defined exactly when g_d = 1")
        if self.g_s is not None and self.g_s not in (0, 1):
            raise ValueError("g_s must be 0 or 1 when defined")

    @property
    def outcome(self) -> int:
        """Three-class outcome: 0 no finding, 1 diseased low, 2 diseased high."""
        return 0 if self.g_d == 0 else 1 + self.g_s


@dataclass(frozen=True)
class GeneratorConfig:
    """Dataset shape, class mix, and noise level for phantom generation."""

    rows: int = 32
    cols: int = 32
    n_train: int = 500
    n_val: int = 100
    n_test: int = 100
    p_diseased: float = 0.5
    p_high_given_diseased: float = 0.5
    noise_std: float = 0.05
    rng_seed: int = 7

    def __post_init__(self):
        for name in ("rows", "cols", "n_train", "n_val", "n_test"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("p_diseased", "p_high_given_diseased"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")

    @classmethod
    def imbalanced(cls, **overrides) -> "GeneratorConfig":
        """Preset with rare disease, exercising the weighted cross-entropy path."""
        merged = {"p_diseased": 0.05, "n_train": 2000}
        merged.update(overrides)
        return cls(**merged)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class DatasetManifest:
    """Split assignment of subject files plus the generator config that made them."""

    entries: list = field(default_factory=list)  # (split, relative path) pairs
    config: dict = field(default_factory=dict)

    def paths(self, split: str) -> list[str]:
        if split not in SPLITS:
            raise ValueError(f"unknown split {split!r}")
        return [rel for s, rel in self.entries if s == split]


# Lesion bands: disjoint with a margin so the two grades stay separable;
# contrast bands are kept close so severity is mostly a size judgement.
_LESION_RADIUS = {0: (2.0, 3.0), 1: (4.0, 5.2)}
_LESION_CONTRAST = {0: (0.42, 0.58), 1: (0.64, 0.84)}


def generate_subject(cfg: GeneratorConfig, index: int) -> Subject:
    """Deterministically generate subject `index` of the dataset seeded by the config."""
    rng = np.random.default_rng(np.random.SeedSequence([cfg.rng_seed, index]))
    rows, cols = cfg.rows, cfg.cols

    g_d = int(rng.random() < cfg.p_diseased)
    g_s = int(rng.random() < cfg.p_high_given_diseased) if g_d else None

    yy, xx = np.mgrid[0:rows, 0:cols].astype(float)
    cy = rows / 2 + rng.uniform(-1.5, 1.5)
    cx = cols / 2 + rng.uniform(-1.5, 1.5)
    ay = rng.uniform(0.34, 0.42) * rows
    ax = rng.uniform(0.36, 0.44) * cols
    rho = np.sqrt(((yy - cy) / ay) ** 2 + ((xx - cx) / ax) ** 2)
    body = 1.0 / (1.0 + np.exp(8.0 * (rho - 1.0)))

    texture = np.zeros((rows, cols))
    for _ in range(3):
        fy = rng.integers(1, 3)
        fx = rng.integers(1, 3)
        phase = rng.uniform(0, 2 * np.pi)
        amp = rng.uniform(0.02, 0.05)
        texture += amp * np.cos(2 * np.pi * (fy * yy / rows + fx * xx / cols) + phase)
    img = body * (1.0 + texture)

    if g_d:
        r_lo, r_hi = _LESION_RADIUS[g_s]
        c_lo, c_hi = _LESION_CONTRAST[g_s]
        radius = rng.uniform(r_lo, r_hi)
        contrast = rng.uniform(c_lo, c_hi)
        # Lesion center stays well inside the body ellipse.
        angle = rng.uniform(0, 2 * np.pi)
        rad_frac = rng.uniform(0.0, 0.45)
        ly = cy + rad_frac * ay * np.sin(angle)
        lx = cx + rad_frac * ax * np.cos(angle)
        dist = np.sqrt((yy - ly) ** 2 + (xx - lx) ** 2)
        img = img + contrast * np.exp(-((dist / radius) ** 4))

    img = img + rng.normal(0.0, cfg.noise_std, size=(rows, cols))
    image = img.astype(np.complex128)
    return Subject(image=image, kspace=dft2(image), g_d=g_d, g_s=g_s)


def _subject_bytes(subject: Subject) -> bytes:
    rows, cols = subject.image.shape
    g_s_byte = NA_BYTE if subject.g_s is None else subject.g_s
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<BIIBB", VERSION, rows, cols, subject.g_d, g_s_byte))
    buf.write(np.ascontiguousarray(subject.image, dtype="<c16").tobytes())
    buf.write(np.ascontiguousarray(subject.kspace, dtype="<c16").tobytes())
    return buf.getvalue()


def write_subject(subject: Subject, path) -> None:
    Path(path).write_bytes(_subject_bytes(subject))


def read_subject(path) -> Subject:
    """Parse a subject file, rejecting bad magic, truncation, and invalid labels."""
    raw = Path(path).read_bytes()
    if len(raw) < 4 or raw[:4] != MAGIC:
        raise ArtifactError(
            f"{path}: bad magic {raw[:4]!r}, expected {MAGIC!r}"
        )
    header_len = 4 + struct.calcsize("<BIIBB")
    if len(raw) < header_len:
        raise ArtifactError(f"{path}: truncated header")
    version, rows, cols, g_d_byte, g_s_byte = struct.unpack("<BIIBB", raw[4:header_len])
    if version != VERSION:
        raise ArtifactError(f"{path}: unsupported version {version}")
    if g_d_byte not in (0, 1):
        raise ArtifactError(f"{path}: disease label byte {g_d_byte} outside {{0,1}}")
    if g_s_byte not in (0, 1, NA_BYTE):
        raise ArtifactError(f"{path}: severity label byte {g_s_byte} outside {{0,1,255}}")
    if (g_s_byte == NA_BYTE) != (g_d_byte == 0):
        raise ArtifactError(
            f"{path}: severity byte {g_s_byte} inconsistent with disease label {g_d_byte}"
        )
    n = rows * cols
    expected = header_len + 2 * n * 16
    if len(raw) != expected:
        raise ArtifactError(f"{path}: expected {expected} bytes, found {len(raw)}")
    image = np.frombuffer(raw, dtype="<c16", count=n, offset=header_len).reshape(rows, cols)
    kspace = np.frombuffer(raw, dtype="<c16", count=n, offset=header_len + n * 16).reshape(rows, cols)
    return Subject(
        image=image.astype(np.complex128),
        kspace=kspace.astype(np.complex128),
        g_d=int(g_d_byte),
        g_s=None if g_s_byte == NA_BYTE else int(g_s_byte),
    )


def write_manifest(manifest: DatasetManifest, path) -> None:
    lines = [f"# {key} = {value}" for key, value in manifest.config.items()]
    lines += [f"{split}\t{rel}" for split, rel in manifest.entries]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path) -> DatasetManifest:
    manifest = DatasetManifest()
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                manifest.config[key.strip()] = value.strip()
            continue
        parts = line.split("\t")
        if len(parts) != 2 or parts[0] not in SPLITS:
            raise ArtifactError(f"{path}:{lineno}: malformed manifest record {line!r}")
        manifest.entries.append((parts[0], parts[1]))
    return manifest


def load_split(manifest_path, split: str) -> list[Subject]:
    """Read and validate every subject of one split, in manifest order."""
    manifest_path = Path(manifest_path)
    manifest = read_manifest(manifest_path)
    return [read_subject(manifest_path.parent / rel) for rel in manifest.paths(split)]


def generate_dataset(cfg: GeneratorConfig, out_dir) -> DatasetManifest:
    """Write all subject files plus manifest.txt under `out_dir`; returns the manifest.

    Subjects are drawn independently per index, so regeneration with the same
    config is byte-identical file by file.
    """
    out_dir = Path(out_dir)
    subjects_dir = out_dir / "subjects"
    subjects_dir.mkdir(parents=True, exist_ok=True)
    manifest = DatasetManifest(config=cfg.to_dict())
    counts = {"train": cfg.n_train, "val": cfg.n_val, "test": cfg.n_test}
    index = 0
    for split in SPLITS:
        for local in range(counts[split]):
            subject = generate_subject(cfg, index)
            rel = f"subjects/{split}_{local:04d}.kspc"
            write_subject(subject, out_dir / rel)
            manifest.entries.append((split, rel))
            index += 1
    write_manifest(manifest, out_dir / "manifest.txt")
    return manifest
