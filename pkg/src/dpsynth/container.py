"""Single-file model container.

Layout: magic "DPMM", little-endian u32 format version, u64-length-prefixed
JSON manifest (config, domains, preprocessor, plan, ledger, tree, tensor
directory), then each tensor as a u64 byte length followed by raw
little-endian float64 data.  Tensor bytes round-trip bit-exactly; the
manifest is serialized with sorted keys so equal models produce equal files.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .dataset import Marginal, Measurement
from .domain import Domain
from .errors import LoadError
from .junction_tree import JunctionTree
from .pgm import PGModel, _calibrate
from .preprocess import Preprocessor
from .selectors import SelectionPlan
from .synthesizer import FORMAT_VERSION, FittedSynthesizer, SynthesizerConfig

_MAGIC = b"DPMM"


def _manifest(fitted: FittedSynthesizer) -> tuple[dict, list[np.ndarray]]:
    tensors: list[np.ndarray] = []
    directory: list[dict] = []
    for i, pot in enumerate(fitted.pgmodel.potentials):
        directory.append({"name": f"potential/{i}", "shape": list(pot.shape)})
        tensors.append(pot)
    for i, m in enumerate(fitted.measurements):
        directory.append(
            {
                "name": f"measurement/{i}",
                "shape": [int(m.marginal.counts.size)],
                "clique": list(m.marginal.clique),
                "sigma": m.sigma,
                "weight": m.weight,
            }
        )
        tensors.append(m.marginal.counts)
    tree = fitted.pgmodel.tree
    manifest = {
        "format_version": fitted.format_version,
        "config": fitted.config.to_dict(),
        "domain": fitted.domain.to_dict(),
        "disc_domain": fitted.disc_domain.to_dict(),
        "preprocessor": fitted.preprocessor.to_dict(),
        "plan": {
            "measurements_spec": [
                [list(cl), sigma, rho] for cl, sigma, rho in fitted.plan.measurements_spec
            ],
            "provenance": fitted.plan.provenance,
        },
        "ledger": fitted.ledger_snapshot,
        "model": {
            "nodes": [list(n) for n in tree.nodes],
            "edges": [[u, v, list(sep)] for u, v, sep in tree.edges],
            "elimination_order": list(tree.elimination_order),
            "total_records": fitted.pgmodel.total_records,
        },
        "tensors": directory,
    }
    return manifest, tensors


def save(fitted: FittedSynthesizer, path) -> None:
    manifest, tensors = _manifest(fitted)
    blob = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", fitted.format_version))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for t in tensors:
            raw = np.ascontiguousarray(t, dtype="<f8").tobytes()
            fh.write(struct.pack("<Q", len(raw)))
            fh.write(raw)


def _read_exact(fh, n: int) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise LoadError("container is truncated")
    return buf


def load(path) -> FittedSynthesizer:
    with open(path, "rb") as fh:
        if _read_exact(fh, 4) != _MAGIC:
            raise LoadError("not a model container (bad magic bytes)")
        (version,) = struct.unpack("<I", _read_exact(fh, 4))
        if version != FORMAT_VERSION:
            raise LoadError(
                f"unsupported format_version {version}; this build reads "
                f"{FORMAT_VERSION}"
            )
        (mlen,) = struct.unpack("<Q", _read_exact(fh, 8))
        try:
            manifest = json.loads(_read_exact(fh, mlen).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise LoadError(f"corrupt manifest: {exc}") from exc
        tensors = []
        for entry in manifest["tensors"]:
            (blen,) = struct.unpack("<Q", _read_exact(fh, 8))
            arr = np.frombuffer(_read_exact(fh, blen), dtype="<f8").astype(float)
            tensors.append(arr.reshape(entry["shape"]))

    try:
        config = SynthesizerConfig.from_dict(manifest["config"])
        domain = Domain.from_dict(manifest["domain"])
        disc_domain = Domain.from_dict(manifest["disc_domain"])
        prep = Preprocessor.from_dict(manifest["preprocessor"])
        tree = JunctionTree(
            nodes=tuple(tuple(n) for n in manifest["model"]["nodes"]),
            edges=tuple(
                (u, v, tuple(sep)) for u, v, sep in manifest["model"]["edges"]
            ),
            elimination_order=tuple(manifest["model"]["elimination_order"]),
        )
        total = float(manifest["model"]["total_records"])
        pots = []
        measurements = []
        for entry, arr in zip(manifest["tensors"], tensors):
            if entry["name"].startswith("potential/"):
                pots.append(arr)
            else:
                measurements.append(
                    Measurement(
                        marginal=Marginal(
                            clique=tuple(entry["clique"]), counts=arr.reshape(-1)
                        ),
                        sigma=float(entry["sigma"]),
                        weight=float(entry.get("weight", 1.0)),
                    )
                )
        node_marginals = _calibrate(tree, disc_domain, pots, total)
        model = PGModel(
            tree=tree,
            domain=disc_domain,
            potentials=tuple(pots),
            total_records=total,
            clique_potentials={},
            node_marginals=tuple(node_marginals),
        )
        plan = SelectionPlan(
            measurements_spec=[
                (tuple(cl), float(sigma), float(rho))
                for cl, sigma, rho in manifest["plan"]["measurements_spec"]
            ],
            provenance=manifest["plan"]["provenance"],
        )
        return FittedSynthesizer(
            config=config,
            domain=domain,
            disc_domain=disc_domain,
            preprocessor=prep,
            pgmodel=model,
            plan=plan,
            measurements=tuple(measurements),
            ledger_snapshot=manifest["ledger"],
            format_version=version,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise LoadError(f"corrupt container: {exc}") from exc
