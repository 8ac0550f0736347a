"""Artifact writers: float text, hashing, tables, codebook documents."""

import math

import numpy as np
import pytest

from smmlkit import (
    ConfigError,
    DomainError,
    PriorSpec,
    binomial_model,
    marginal_table,
    multinomial_model,
    truncated_poisson_model,
)
from smmlkit.partition_opt import dp_exact_1d
from smmlkit.serialize import (
    CODEBOOK_FORMAT,
    artifact_meta,
    canonical_json,
    codebook_document,
    config_hash,
    fmt_float,
    load_codebook_document,
    model_from_descriptor,
    recompute_codelength,
    write_json_doc,
    write_table,
)

SEED = 20260823


def test_fmt_float_round_trips_doubles():
    rng = np.random.default_rng(SEED)
    values = list(rng.standard_normal(200))
    values += list(rng.standard_normal(50) * 10.0 ** rng.integers(-300, 300, 50))
    values += [0.0, -0.0, 1.0 / 3.0, math.pi, 1e-308, 1.7976931348623157e308]
    for v in values:
        text = fmt_float(v)
        assert float(text) == v
        assert "," not in text


def test_canonical_json_is_order_free_and_compact():
    a = {"b": 1, "a": [1.5, True], "c": {"y": None, "x": "s"}}
    b = {"c": {"x": "s", "y": None}, "a": [1.5, True], "b": 1}
    assert canonical_json(a) == canonical_json(b)
    assert canonical_json(a) == '{"a":[1.5,true],"b":1,"c":{"x":"s","y":null}}'


def test_config_hash_tracks_content_not_order():
    base = {"model": "binomial", "n": 10, "seed": 0}
    same = {"seed": 0, "n": 10, "model": "binomial"}
    assert config_hash(base) == config_hash(same)
    assert config_hash(base) != config_hash({**base, "seed": 1})
    digest = config_hash(base)
    assert len(digest) == 64
    assert set(digest) <= set("0123456789abcdef")


def test_artifact_meta_fields():
    meta = artifact_meta("deadbeef", 42, method="dp")
    assert meta["config_hash"] == "deadbeef"
    assert meta["seed"] == 42
    assert meta["method"] == "dp"
    assert isinstance(meta["tool_version"], str) and meta["tool_version"]


def test_write_table_exact_bytes(tmp_path):
    path = tmp_path / "t.csv"
    write_table(
        path,
        ["n", "value", "flag"],
        [[10, 0.5, True], [20, 1.0 / 3.0, False]],
        meta={"seed": 0, "config_hash": "abc"},
    )
    expected = (
        "# config_hash=abc\n"
        "# seed=0\n"
        "n,value,flag\n"
        "10,0.5,1\n"
        "20,0.33333333333333331,0\n"
    )
    assert path.read_bytes().decode() == expected


def test_write_table_rejects_bad_rows(tmp_path):
    with pytest.raises(DomainError):
        write_table(tmp_path / "a.csv", ["x", "y"], [[1.0]])
    with pytest.raises(DomainError):
        write_table(tmp_path / "b.csv", ["x"], [["a,b"]])
    with pytest.raises(DomainError):
        write_table(tmp_path / "c.csv", ["x"], [[1]], meta={"note": "x#y"})


@pytest.fixture(scope="module")
def solved_doc():
    model = binomial_model(10)
    prior = PriorSpec("beta", (1.0, 1.0))
    marg = marginal_table(model, prior)
    res = dp_exact_1d(model, marg, range(1, 7))
    doc = codebook_document(
        model,
        prior,
        res.codebook,
        res.partition,
        res.codelength,
        cfg_hash=config_hash({"demo": 1}),
        seed=0,
        method=res.method,
    )
    return doc


def test_codebook_document_round_trip(tmp_path, solved_doc):
    path = tmp_path / "codebook.json"
    write_json_doc(path, solved_doc)
    loaded = load_codebook_document(path)
    assert loaded == solved_doc
    recomputed = recompute_codelength(loaded)
    assert abs(recomputed - loaded["codelength_nats"]) < 1e-10
    assert abs(
        loaded["codelength_bits"] - loaded["codelength_nats"] / math.log(2.0)
    ) < 1e-15
    assert loaded["format"] == CODEBOOK_FORMAT
    assert len(loaded["codepoints"]) == loaded["k"] == len(loaded["q"])


def test_codebook_document_version_guard(tmp_path, solved_doc):
    bad_fmt = dict(solved_doc, format="something.else")
    path = tmp_path / "bad_format.json"
    write_json_doc(path, bad_fmt)
    with pytest.raises(ConfigError):
        load_codebook_document(path)
    bad_ver = dict(solved_doc, version=99)
    path = tmp_path / "bad_version.json"
    write_json_doc(path, bad_ver)
    with pytest.raises(ConfigError):
        load_codebook_document(path)


def test_model_descriptor_round_trip():
    prior = PriorSpec("gamma", (2.0, 1.0))
    models = [
        (binomial_model(7, "arcsin"), None),
        (multinomial_model(3, 5), None),
        (truncated_poisson_model(4, prior), prior),
    ]
    theta = {1: np.array([0.37]), 2: np.array([0.2, 0.5])}
    # arcsin thetas live in (0, pi/2) but 0.37 is interior either way
    for model, pr in models:
        rebuilt = model_from_descriptor(model.descriptor(), pr)
        assert rebuilt.descriptor() == model.descriptor()
        space = model.default_space()
        want = model.log_pmf(theta[model.dim_theta], space)
        got = rebuilt.log_pmf(theta[model.dim_theta], space)
        assert np.max(np.abs(want - got)) < 1e-14


def test_model_descriptor_rejections():
    with pytest.raises(DomainError):
        model_from_descriptor({"family": "poisson", "sample_size": 4,
                               "eps_trunc": 1e-10})
    with pytest.raises(DomainError):
        model_from_descriptor({"family": "gaussian"})
