"""Directory-bundle persistence for fitted models.

Numeric arrays are stored as little-endian float64 binaries behind a
16-byte header: magic ``STNC``, format version u32, rank u32, reserved
u32, then one u64 per dimension, then the C-order payload. Everything
else is UTF-8 ``key=value`` text or one-entry-per-line text, so bundles
round-trip byte for byte and can be read from any language.

``manifest.kv`` carries the format version, the creating configuration,
and a sha256 per bundle file; loading verifies every hash.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BundleError
from .neuralnet import LayerSpec, NetworkModel
from .reducer import SvdModel
from .vectorizer import VectorizerModel

MAGIC = b"STNC"
FORMAT_VERSION = 1

MANIFEST_NAME = "manifest.kv"

_HEADER = struct.Struct("<4sIII")


def write_array(path: str | Path, arr: np.ndarray) -> None:
    arr = np.ascontiguousarray(arr, dtype="<f8")
    with Path(path).open("wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, arr.ndim, 0))
        fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        fh.write(arr.tobytes(order="C"))


def read_array(path: str | Path) -> np.ndarray:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise BundleError(f"missing array file {path}", code="missing-file") from None
    if len(raw) < _HEADER.size:
        raise BundleError(f"truncated array file {path}", code="corrupt")
    magic, version, rank, _ = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise BundleError(f"bad magic in {path}", code="corrupt")
    if version != FORMAT_VERSION:
        raise BundleError(
            f"array format version {version} in {path}, expected {FORMAT_VERSION}",
            code="bad-version",
        )
    dims_end = _HEADER.size + 8 * rank
    if len(raw) < dims_end:
        raise BundleError(f"truncated array file {path}", code="corrupt")
    shape = struct.unpack_from(f"<{rank}Q", raw, _HEADER.size)
    count = 1
    for d in shape:
        count *= d
    if len(raw) != dims_end + 8 * count:
        raise BundleError(
            f"array file {path} payload size does not match its header",
            code="corrupt",
        )
    data = np.frombuffer(raw, dtype="<f8", count=count, offset=dims_end)
    return data.reshape(shape).astype(np.float64, copy=True)


def write_kv(path: str | Path, entries: dict[str, str]) -> None:
    lines = []
    for key, value in entries.items():
        key = str(key)
        value = str(value)
        if "=" in key or "\n" in key or "\n" in value:
            raise BundleError(f"illegal key/value: {key!r}", code="bad-kv")
        lines.append(f"{key}={value}\n")
    Path(path).write_text("".join(lines), encoding="utf-8")


def read_kv(path: str | Path) -> dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise BundleError(f"missing file {path}", code="missing-file") from None
    entries: dict[str, str] = {}
    for line_no, line in enumerate(text.splitlines(), 1):
        if not line:
            continue
        if "=" not in line:
            raise BundleError(
                f"{path}:{line_no}: expected key=value, got {line!r}", code="corrupt"
            )
        key, _, value = line.partition("=")
        entries[key] = value
    return entries


def _fmt_float(x: float) -> str:
    return repr(float(x))


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


# --- vectorizer -----------------------------------------------------------


def save_vectorizer(bundle_dir: Path, model: VectorizerModel) -> None:
    terms = model.terms()
    (bundle_dir / "vocab.txt").write_text(
        "".join(t + "\n" for t in terms), encoding="utf-8"
    )
    write_kv(
        bundle_dir / "vectorizer.kv",
        {"n_docs": str(model.n_docs), "vocab_size": str(model.vocab_size)},
    )
    write_array(bundle_dir / "vectorizer_df.bin", model.doc_freq.astype(np.float64))
    write_array(bundle_dir / "vectorizer_idf.bin", model.idf)


def load_vectorizer(bundle_dir: Path) -> VectorizerModel:
    try:
        terms = (bundle_dir / "vocab.txt").read_text(encoding="utf-8").splitlines()
    except FileNotFoundError:
        raise BundleError("missing vocab.txt", code="missing-file") from None
    meta = read_kv(bundle_dir / "vectorizer.kv")
    df = read_array(bundle_dir / "vectorizer_df.bin")
    idf = read_array(bundle_dir / "vectorizer_idf.bin")
    expected = (len(terms),)
    if len(terms) != int(meta["vocab_size"]) or df.shape != expected or idf.shape != expected:
        raise BundleError("vectorizer files disagree on vocabulary size", code="corrupt")
    return VectorizerModel(
        vocabulary={t: i for i, t in enumerate(terms)},
        doc_freq=df.astype(np.int64),
        idf=idf,
        n_docs=int(meta["n_docs"]),
    )


# --- svd ------------------------------------------------------------------


def save_svd(bundle_dir: Path, model: SvdModel, evr_curve: np.ndarray) -> None:
    write_kv(
        bundle_dir / "svd.kv",
        {"k": str(model.k), "pilot_rank": str(len(evr_curve))},
    )
    write_array(bundle_dir / "svd_embeddings.bin", model.term_embeddings)
    write_array(bundle_dir / "svd_singular_values.bin", model.singular_values)
    write_array(bundle_dir / "svd_evr.bin", model.explained_variance_ratio)
    write_array(bundle_dir / "svd_evr_curve.bin", np.asarray(evr_curve, dtype=np.float64))


def load_svd(bundle_dir: Path) -> tuple[SvdModel, np.ndarray]:
    meta = read_kv(bundle_dir / "svd.kv")
    k = int(meta["k"])
    model = SvdModel(
        term_embeddings=read_array(bundle_dir / "svd_embeddings.bin"),
        singular_values=read_array(bundle_dir / "svd_singular_values.bin"),
        explained_variance_ratio=read_array(bundle_dir / "svd_evr.bin"),
        k=k,
    )
    if model.term_embeddings.shape[1] != k or model.singular_values.shape != (k,):
        raise BundleError("svd files disagree on rank", code="corrupt")
    curve = read_array(bundle_dir / "svd_evr_curve.bin")
    return model, curve


# --- network --------------------------------------------------------------


def save_network(bundle_dir: Path, model: NetworkModel) -> None:
    layers = ",".join(f"{s.units}:{s.activation}" for s in model.layer_specs)
    write_kv(
        bundle_dir / "network.kv",
        {
            "input_dim": str(model.input_dim),
            "rng_seed": str(model.rng_seed),
            "layers": layers,
        },
    )
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        write_array(bundle_dir / f"net_w{i}.bin", w)
        write_array(bundle_dir / f"net_b{i}.bin", b)


def load_network(bundle_dir: Path) -> NetworkModel:
    meta = read_kv(bundle_dir / "network.kv")
    specs = []
    for part in meta["layers"].split(","):
        units, _, activation = part.partition(":")
        specs.append(LayerSpec(units=int(units), activation=activation))
    weights = []
    biases = []
    for i in range(len(specs)):
        weights.append(read_array(bundle_dir / f"net_w{i}.bin"))
        biases.append(read_array(bundle_dir / f"net_b{i}.bin"))
    model = NetworkModel(
        layer_specs=tuple(specs),
        weights=weights,
        biases=biases,
        input_dim=int(meta["input_dim"]),
        rng_seed=int(meta["rng_seed"]),
    )
    fan_in = model.input_dim
    for spec, w, b in zip(specs, weights, biases):
        if w.shape != (fan_in, spec.units) or b.shape != (spec.units,):
            raise BundleError("network weight shapes do not chain", code="corrupt")
        fan_in = spec.units
    return model


# --- manifest -------------------------------------------------------------


def write_manifest(bundle_dir: Path, config_entries: dict[str, str]) -> None:
    """Hash every bundle file and write the manifest last."""
    bundle_dir = Path(bundle_dir)
    entries: dict[str, str] = {"format_version": str(FORMAT_VERSION)}
    for key in config_entries:
        entries[f"config.{key}"] = config_entries[key]
    for path in sorted(bundle_dir.iterdir()):
        if path.name == MANIFEST_NAME or path.is_dir():
            continue
        entries[f"hash.{path.name}"] = sha256_file(path)
    write_kv(bundle_dir / MANIFEST_NAME, entries)


def verify_manifest(bundle_dir: Path) -> dict[str, str]:
    """Check format version and every recorded hash; returns the config."""
    bundle_dir = Path(bundle_dir)
    manifest = read_kv(bundle_dir / MANIFEST_NAME)
    version = manifest.get("format_version")
    if version != str(FORMAT_VERSION):
        raise BundleError(
            f"bundle format version {version}, expected {FORMAT_VERSION}",
            code="bad-version",
        )
    config: dict[str, str] = {}
    for key, value in manifest.items():
        if key.startswith("config."):
            config[key[len("config.") :]] = value
        elif key.startswith("hash."):
            name = key[len("hash.") :]
            target = bundle_dir / name
            if not target.is_file():
                raise BundleError(f"bundle file {name} is missing", code="missing-file")
            actual = sha256_file(target)
            if actual != value:
                raise BundleError(
                    f"bundle file {name} hash mismatch (corrupt bundle)",
                    code="hash-mismatch",
                )
    return config


@dataclass
class Bundle:
    """A verified, fully loaded artifact bundle."""

    path: Path
    config: dict[str, str]
    vectorizer: VectorizerModel
    svd: SvdModel
    evr_curve: np.ndarray
    network: NetworkModel | None

    @property
    def feature_mode(self) -> str:
        return self.config.get("feature_mode", "concat_scm")


def load_bundle(bundle_dir: str | Path, require_network: bool = True) -> Bundle:
    """Verify manifest hashes, then load every model in the bundle."""
    bundle_dir = Path(bundle_dir)
    if not bundle_dir.is_dir():
        raise BundleError(f"bundle directory not found: {bundle_dir}", code="missing-file")
    config = verify_manifest(bundle_dir)
    vectorizer = load_vectorizer(bundle_dir)
    svd, evr_curve = load_svd(bundle_dir)
    network = None
    if (bundle_dir / "network.kv").is_file():
        network = load_network(bundle_dir)
    elif require_network:
        raise BundleError(
            "bundle has no trained network (fit-only bundle)", code="missing-file"
        )
    if svd.term_embeddings.shape[0] != vectorizer.vocab_size:
        raise BundleError(
            "svd embeddings do not match the vocabulary size", code="corrupt"
        )
    return Bundle(
        path=bundle_dir,
        config=config,
        vectorizer=vectorizer,
        svd=svd,
        evr_curve=evr_curve,
        network=network,
    )
