"""JSON readers and writers for models, covariance sets and sample sets.

Complex matrices are stored row-major as lists of ``[re, im]`` pairs;
coupling matrices as row-major real lists.  Shapes are implied by ``dims``
and cross-checked on load.
"""

import json
from pathlib import Path

import numpy as np

from .channel_model import ChannelModel, Dimensions, InputCovarianceSet, LinkStatistics
from .errors import ModelFormatError
from .stats_extract import SampleSet


def complex_to_pairs(a):
    a = np.asarray(a, dtype=complex).ravel()
    return np.stack([a.real, a.imag], axis=1).tolist()


def pairs_to_complex(pairs, shape, what):
    arr = np.asarray(pairs, dtype=float)
    n = int(np.prod(shape))
    if arr.shape != (n, 2):
        raise ModelFormatError(f"{what}: expected {n} [re, im] pairs, got array of shape {arr.shape}")
    return (arr[:, 0] + 1j * arr[:, 1]).reshape(shape)


def real_to_list(a):
    return np.asarray(a, dtype=float).ravel().tolist()


def list_to_real(values, shape, what):
    arr = np.asarray(values, dtype=float)
    n = int(np.prod(shape))
    if arr.shape != (n,):
        raise ModelFormatError(f"{what}: expected {n} reals, got array of shape {arr.shape}")
    return arr.reshape(shape)


def dims_to_dict(d: Dimensions):
    return {"L": d.L, "K": d.K, "N": d.N, "M": d.M, "N_l": list(d.n_l), "M_k": list(d.m_k)}


def dims_from_dict(obj) -> Dimensions:
    try:
        n_l = [int(v) for v in obj["N_l"]]
        m_k = [int(v) for v in obj["M_k"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"dims: {exc}") from exc
    try:
        d = Dimensions(tuple(n_l), tuple(m_k))
    except ValueError as exc:
        raise ModelFormatError(f"dims: {exc}") from exc
    for key, want in (("L", d.L), ("K", d.K), ("N", d.N), ("M", d.M)):
        if key in obj and int(obj[key]) != want:
            raise ModelFormatError(f"dims.{key} = {obj[key]} but the per-set counts give {want}")
    return d


def model_to_dict(model: ChannelModel):
    d = model.dims
    return {
        "dims": dims_to_dict(d),
        "powers": [float(p) for p in model.powers],
        "links": [
            [
                {
                    "hbar": complex_to_pairs(lk.hbar),
                    "u": complex_to_pairs(lk.u),
                    "v": complex_to_pairs(lk.v),
                    "g": real_to_list(lk.g),
                }
                for lk in row
            ]
            for row in model.links
        ],
    }


def model_from_dict(obj) -> ChannelModel:
    if not isinstance(obj, dict) or "dims" not in obj or "links" not in obj:
        raise ModelFormatError("model file needs 'dims' and 'links'")
    d = dims_from_dict(obj["dims"])
    rows = obj["links"]
    if len(rows) != d.L or any(len(r) != d.K for r in rows):
        raise ModelFormatError(f"links must be an L x K = {d.L} x {d.K} grid")
    links = []
    for l, row in enumerate(rows):
        out = []
        for k, e in enumerate(row):
            n, m = d.n_l[l], d.m_k[k]
            where = f"links[{l}][{k}]"
            try:
                out.append(
                    LinkStatistics(
                        pairs_to_complex(e["hbar"], (n, m), where + ".hbar"),
                        pairs_to_complex(e["u"], (n, n), where + ".u"),
                        pairs_to_complex(e["v"], (m, m), where + ".v"),
                        list_to_real(e["g"], (n, m), where + ".g"),
                    )
                )
            except KeyError as exc:
                raise ModelFormatError(f"{where}: missing field {exc}") from exc
        links.append(out)
    powers = obj.get("powers") or ()
    if powers and len(powers) != d.K:
        raise ModelFormatError(f"powers has {len(powers)} entries, expected K = {d.K}")
    return ChannelModel(d, links, tuple(float(p) for p in powers))


def covariances_to_dict(q: InputCovarianceSet, dims: Dimensions, **extra):
    return {"dims": dims_to_dict(dims), "Q": [complex_to_pairs(qk) for qk in q.q], **extra}


def covariances_from_dict(obj, dims: Dimensions) -> InputCovarianceSet:
    qs = obj.get("Q")
    if qs is None or len(qs) != dims.K:
        raise ModelFormatError(f"covariance file needs K = {dims.K} matrices under 'Q'")
    return InputCovarianceSet(
        tuple(pairs_to_complex(qk, (m, m), f"Q[{k}]") for k, (qk, m) in enumerate(zip(qs, dims.m_k)))
    )


def samples_to_dict(ss: SampleSet):
    return {
        "dims": dims_to_dict(ss.dims),
        "S": ss.S,
        "samples": [complex_to_pairs(h) for h in ss.samples],
    }


def samples_from_dict(obj) -> SampleSet:
    d = dims_from_dict(obj.get("dims", {}))
    raw = obj.get("samples")
    if raw is None:
        raise ModelFormatError("sample file needs 'samples'")
    if "S" in obj and int(obj["S"]) != len(raw):
        raise ModelFormatError(f"header says S = {obj['S']} but {len(raw)} samples are present")
    h = np.stack([pairs_to_complex(s, (d.N, d.M), f"samples[{i}]") for i, s in enumerate(raw)])
    return SampleSet(d, h)


def _read(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"cannot read {path}: {exc}") from exc


def _write(path, obj):
    Path(path).write_text(json.dumps(obj))


def load_model(path) -> ChannelModel:
    return model_from_dict(_read(path))


def save_model(model: ChannelModel, path):
    _write(path, model_to_dict(model))


def load_covariances(path, dims) -> InputCovarianceSet:
    return covariances_from_dict(_read(path), dims)


def save_covariances(q, dims, path, **extra):
    _write(path, covariances_to_dict(q, dims, **extra))


def load_samples(path) -> SampleSet:
    return samples_from_dict(_read(path))


def save_samples(ss: SampleSet, path):
    _write(path, samples_to_dict(ss))
