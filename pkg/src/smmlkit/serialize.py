"""Deterministic artifact writers: delimited tables and JSON documents.

Every artifact embeds the configuration hash, the master seed, and the tool
version, so re-running a stored config reproduces it byte for byte.  CSV
cells use '.' decimals with 17 significant digits; JSON uses sorted keys and
repr-exact floats.
"""

from __future__ import annotations

import hashlib
import json
import math
from typing import Optional

import numpy as np

from ._version import __version__
from .codebook import (
    Codebook,
    Partition,
    codelength,
    partition_from_assignment,
)
from .errors import ConfigError, DomainError
from .models import (
    ExponentialFamily,
    MarginalTable,
    PriorSpec,
    binomial_model,
    marginal_table,
    multinomial_model,
    truncated_poisson_model,
)

__all__ = [
    "CODEBOOK_FORMAT",
    "CODEBOOK_VERSION",
    "fmt_float",
    "canonical_json",
    "config_hash",
    "artifact_meta",
    "write_table",
    "write_json_doc",
    "prior_from_descriptor",
    "model_from_descriptor",
    "codebook_document",
    "load_codebook_document",
    "rebuild_codebook",
    "recompute_codelength",
]

LN2 = math.log(2.0)

CODEBOOK_FORMAT = "smmlkit.codebook"
CODEBOOK_VERSION = 1


def fmt_float(value: float) -> str:
    """17-significant-digit decimal text, enough to round-trip a double."""
    return format(float(value), ".17g")


def _cell_text(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return fmt_float(value)
    text = str(value)
    if "," in text or "\n" in text or "#" in text:
        raise DomainError(f"cell text {text!r} would corrupt the table")
    return text


def canonical_json(obj) -> str:
    """Key-sorted, whitespace-free JSON text used for hashing."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(config_mapping) -> str:
    """sha256 of the canonical JSON form of a configuration mapping."""
    return hashlib.sha256(canonical_json(config_mapping).encode()).hexdigest()


def artifact_meta(cfg_hash: str, seed: int, **extra) -> dict:
    meta = {"config_hash": cfg_hash, "seed": int(seed),
            "tool_version": __version__}
    meta.update(extra)
    return meta


def write_table(path, header, rows, meta: Optional[dict] = None) -> None:
    """Comma-separated table with `# key=value` metadata lines on top."""
    lines = []
    for key in sorted(meta or {}):
        lines.append(f"# {key}={_cell_text((meta or {})[key])}")
    lines.append(",".join(header))
    for row in rows:
        if len(row) != len(header):
            raise DomainError("row width does not match the header")
        lines.append(",".join(_cell_text(cell) for cell in row))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_json_doc(path, document: dict) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(document, fh, sort_keys=True, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# the versioned codebook document


def prior_from_descriptor(desc: dict) -> PriorSpec:
    return PriorSpec(desc["family"], tuple(desc["params"]))


def model_from_descriptor(
    desc: dict, prior: Optional[PriorSpec] = None
) -> ExponentialFamily:
    family = desc.get("family")
    if family == "binomial":
        return binomial_model(desc["sample_size"], param=desc["param"])
    if family == "multinomial":
        return multinomial_model(desc["num_categories"], desc["sample_size"])
    if family == "poisson":
        if prior is None:
            raise DomainError(
                "rebuilding a truncated Poisson model needs its prior"
            )
        return truncated_poisson_model(
            desc["sample_size"], prior, eps_trunc=desc["eps_trunc"]
        )
    raise DomainError(f"unknown model family {family!r}")


def codebook_document(
    model: ExponentialFamily,
    prior: PriorSpec,
    codebook: Codebook,
    partition: Partition,
    length_nats: float,
    *,
    cfg_hash: str,
    seed: int,
    method: str,
) -> dict:
    """JSON-ready description of a solved codebook.

    Carries everything needed to rebuild the model, re-derive the marginal,
    and recompute the codelength for the round-trip check.
    """
    return {
        "format": CODEBOOK_FORMAT,
        "version": CODEBOOK_VERSION,
        "tool_version": __version__,
        "config_hash": cfg_hash,
        "seed": int(seed),
        "method": method,
        "model": model.descriptor(),
        "prior": {"family": prior.family, "params": list(prior.params)},
        "k": int(codebook.k),
        "codepoints": [[float(v) for v in row] for row in codebook.codepoints],
        "q": [float(v) for v in codebook.assertion_probs],
        "assignment": [int(j) for j in partition.assignment],
        "codelength_nats": float(length_nats),
        "codelength_bits": float(length_nats) / LN2,
    }


def load_codebook_document(path) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != CODEBOOK_FORMAT:
        raise ConfigError(f"{path}: not a codebook document")
    if doc.get("version") != CODEBOOK_VERSION:
        raise ConfigError(
            f"{path}: unsupported codebook version {doc.get('version')!r}"
        )
    return doc


def rebuild_codebook(doc: dict):
    """(model, prior, marginal, codebook, partition) from a loaded document."""
    prior = prior_from_descriptor(doc["prior"])
    model = model_from_descriptor(doc["model"], prior)
    marginal = marginal_table(model, prior)
    codebook = Codebook(
        codepoints=np.array(doc["codepoints"], dtype=float),
        assertion_probs=np.array(doc["q"], dtype=float),
    )
    partition = partition_from_assignment(
        np.array(doc["assignment"], dtype=int), doc["k"]
    )
    return model, prior, marginal, codebook, partition


def recompute_codelength(doc: dict) -> float:
    """Codelength of the stored codebook, for round-trip verification."""
    model, _, marginal, codebook, partition = rebuild_codebook(doc)
    return codelength(codebook, partition, marginal, model)
