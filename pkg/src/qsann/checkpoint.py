"""Versioned JSON checkpoints.

A checkpoint is a single self-describing JSON document: schema version,
model kind, configuration, every parameter array (base64-encoded float64
bytes plus shape), the vocabulary, the observable list for quantum models,
and the dataset recipe (path, ratios, split seed) needed to rebuild
compatible splits.  Any format change requires a schema version bump.
"""

from __future__ import annotations

import base64
import json

import numpy as np

from .attention import ObservableSet, QsalLayerParams
from .ansatz import AnsatzSpec, ParamVector
from .baselines import CsannParams, NaiveParams
from .data import EmbeddingTable, Vocabulary
from .errors import ParseError
from .model import ModelConfig, QsannModel
from .sim import PauliString

SCHEMA_VERSION = 1


def _encode_array(arr: np.ndarray) -> dict:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    return {
        "shape": list(arr.shape),
        "data": base64.b64encode(arr.tobytes()).decode("ascii"),
    }


def _decode_array(obj: dict) -> np.ndarray:
    try:
        raw = base64.b64decode(obj["data"])
        arr = np.frombuffer(raw, dtype=np.float64).copy()
        return arr.reshape(obj["shape"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed parameter array: {exc}") from exc


def _model_payload(model) -> dict:
    if isinstance(model, QsannModel):
        cfg = model.config
        return {
            "model_kind": "qsann",
            "model_config": {
                "n_qubits": cfg.n_qubits,
                "enc_depth": cfg.enc_depth,
                "qkv_depth": cfg.qkv_depth,
                "n_layers": cfg.n_layers,
                "lam": cfg.lam,
                "gamma": cfg.gamma,
            },
            "observables": [str(obs) for obs in model.observables.observables],
            "params": {
                **{
                    f"layer{i}.{name}": _encode_array(getattr(layer, name).values)
                    for i, layer in enumerate(model.layers)
                    for name in ("theta_q", "theta_k", "theta_v")
                },
                "head_w": _encode_array(model.head_w),
                "head_b": _encode_array(model.head_b),
                "embeddings": _encode_array(model.embeddings.rows),
            },
        }
    if isinstance(model, CsannParams):
        return {
            "model_kind": "csann",
            "model_config": {
                "dim": model.dim,
                "lam": model.lam,
                "gamma": model.gamma,
            },
            "params": {
                "w_query": _encode_array(model.w_query),
                "w_key": _encode_array(model.w_key),
                "w_value": _encode_array(model.w_value),
                "head_w": _encode_array(model.head_w),
                "head_b": _encode_array(model.head_b),
                "embeddings": _encode_array(model.embeddings.rows),
            },
        }
    if isinstance(model, NaiveParams):
        return {
            "model_kind": "naive",
            "model_config": {
                "dim": model.dim,
                "lam": model.lam,
                "gamma": model.gamma,
            },
            "params": {
                "head_w": _encode_array(model.head_w),
                "head_b": _encode_array(model.head_b),
                "embeddings": _encode_array(model.embeddings.rows),
            },
        }
    raise ParseError(f"cannot checkpoint a {type(model).__name__}")


def save_checkpoint(path, model, vocabulary: Vocabulary, dataset_meta: dict) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        **_model_payload(model),
        "vocabulary": list(vocabulary.id_to_token),
        "vocab_sha256": vocabulary.content_hash(),
        "dataset": dataset_meta,
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(doc, handle, sort_keys=True)
        handle.write("\n")


def _build_qsann(doc: dict) -> QsannModel:
    cfg = ModelConfig(**doc["model_config"])
    params = doc["params"]
    spec = AnsatzSpec(cfg.n_qubits, cfg.qkv_depth)
    layers = [
        QsalLayerParams(
            cfg.n_qubits,
            cfg.enc_depth,
            cfg.qkv_depth,
            *(
                ParamVector(spec, _decode_array(params[f"layer{i}.{name}"]))
                for name in ("theta_q", "theta_k", "theta_v")
            ),
        )
        for i in range(cfg.n_layers)
    ]
    observables = ObservableSet(
        tuple(PauliString.from_str(text) for text in doc["observables"])
    )
    return QsannModel(
        config=cfg,
        layers=layers,
        head_w=_decode_array(params["head_w"]),
        head_b=_decode_array(params["head_b"]),
        embeddings=EmbeddingTable(_decode_array(params["embeddings"])),
        observables=observables,
    )


def load_checkpoint(path):
    """Return (model, vocabulary, full document)."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            doc = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read checkpoint {path}: {exc}") from exc
    try:
        version = doc["schema_version"]
        if version != SCHEMA_VERSION:
            raise ParseError(f"unsupported checkpoint schema version {version}")
        kind = doc["model_kind"]
        params = doc["params"]
        if kind == "qsann":
            model = _build_qsann(doc)
        elif kind == "csann":
            cfg = doc["model_config"]
            model = CsannParams(
                w_query=_decode_array(params["w_query"]),
                w_key=_decode_array(params["w_key"]),
                w_value=_decode_array(params["w_value"]),
                head_w=_decode_array(params["head_w"]),
                head_b=_decode_array(params["head_b"]),
                embeddings=EmbeddingTable(_decode_array(params["embeddings"])),
                lam=cfg["lam"],
                gamma=cfg["gamma"],
            )
        elif kind == "naive":
            cfg = doc["model_config"]
            model = NaiveParams(
                head_w=_decode_array(params["head_w"]),
                head_b=_decode_array(params["head_b"]),
                embeddings=EmbeddingTable(_decode_array(params["embeddings"])),
                lam=cfg["lam"],
                gamma=cfg["gamma"],
            )
        else:
            raise ParseError(f"unknown model kind {kind!r}")
        vocabulary = Vocabulary(list(doc["vocabulary"]))
    except ParseError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed checkpoint {path}: {exc}") from exc
    return model, vocabulary, doc
