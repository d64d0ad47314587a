"""Identify a jointly correlated channel model from channel samples."""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channel_model import ChannelModel, Dimensions, LinkStatistics
from .errors import DegenerateSamples, DimensionMismatch
from .linalg import eigh_desc
from .mc_oracle import _Sampler

# correlation matrices with trace below this (relative to the sample
# energy) are treated as numerically zero
DEGENERATE_REL = 1e-13


@dataclass(frozen=True)
class SampleSet:
    """S full channel matrices, shape (S, N, M), split into links by ``dims``."""

    dims: Dimensions
    samples: np.ndarray

    def __post_init__(self):
        h = np.array(self.samples, dtype=complex)
        if h.ndim != 3:
            raise DimensionMismatch(f"samples must have shape (S, N, M), got {h.shape}")
        if h.shape[1:] != (self.dims.N, self.dims.M):
            raise DimensionMismatch(
                f"sample shape {h.shape[1:]} does not match dims ({self.dims.N}, {self.dims.M})"
            )
        if h.shape[0] < 2:
            raise DegenerateSamples("need at least 2 samples")
        h.setflags(write=False)
        object.__setattr__(self, "samples", h)

    @property
    def S(self):
        return self.samples.shape[0]

    def link(self, l, k):
        return self.samples[:, self.dims.rows(l), self.dims.cols(k)]


@dataclass(frozen=True)
class Extraction:
    model: ChannelModel
    energy_residual: float
    max_imag: float
    scales: Sequence[float]


def _herm_batch(h):
    return np.conj(np.swapaxes(h, -1, -2))


def extract_full(samples: SampleSet, powers=None) -> Extraction:
    """Extract (Hbar, U, V, G) per link plus diagnostics.

    Steps per link: sample mean, centering, one joint per-user scale so the
    normalization holds, receive/transmit correlation eigenbases (descending
    eigenvalues, fixed phases), then G = mean |U^H H~ V|^2.
    ``energy_residual`` compares sum(G) with the mean centered energy.
    """
    d = samples.dims
    means = {}
    centered = {}
    for l in range(d.L):
        for k in range(d.K):
            h = samples.link(l, k)
            means[l, k] = h.mean(axis=0)
            centered[l, k] = h - means[l, k]

    scales = []
    for k in range(d.K):
        energy = sum(
            np.sum(np.abs(means[l, k]) ** 2) + np.mean(np.sum(np.abs(centered[l, k]) ** 2, axis=(1, 2)))
            for l in range(d.L)
        )
        if not energy > 0:
            raise DegenerateSamples(f"user {k} has zero sample energy")
        scales.append(float(np.sqrt(d.N * d.m_k[k] / d.M / energy)))

    links = []
    residual = 0.0
    max_imag = 0.0
    for l in range(d.L):
        row = []
        for k in range(d.K):
            c = scales[k]
            hbar = c * means[l, k]
            ht = c * centered[l, k]
            n, m = d.n_l[l], d.m_k[k]
            scattered = float(np.mean(np.sum(np.abs(ht) ** 2, axis=(1, 2))))
            if scattered <= DEGENERATE_REL * max(1.0, float(np.sum(np.abs(hbar) ** 2))):
                # no fluctuation around the mean: any bases, zero coupling
                row.append(LinkStatistics(hbar, np.eye(n), np.eye(m), np.zeros((n, m))))
                continue
            r_r = np.mean(ht @ _herm_batch(ht), axis=0)
            r_t = np.mean(_herm_batch(ht) @ ht, axis=0)
            if np.real(np.trace(r_r)) <= 0 or np.real(np.trace(r_t)) <= 0:
                raise DegenerateSamples(f"link ({l}, {k}) has a zero correlation matrix")
            _, u = eigh_desc(r_r)
            _, v = eigh_desc(r_t)
            rot = u.conj().T @ ht @ v
            prod = np.mean(rot * np.conj(rot), axis=0)
            max_imag = max(max_imag, float(np.max(np.abs(prod.imag))))
            g_raw = prod.real
            residual = max(residual, abs(float(np.sum(g_raw)) - scattered))
            row.append(LinkStatistics(hbar, u, v, np.maximum(g_raw, 0.0)))
        links.append(row)
    model = ChannelModel(d, links, tuple(powers) if powers is not None else ())
    return Extraction(model, residual, max_imag, tuple(scales))


def extract(samples: SampleSet, powers=None) -> ChannelModel:
    return extract_full(samples, powers).model


def draw_samples(model: ChannelModel, S: int, seed: int, stream: int = 0) -> SampleSet:
    """S unprecoded channel draws Hbar + H~ from the Monte-Carlo sampler."""
    unit = ChannelModel(model.dims, model.links, tuple(float(m) for m in model.dims.m_k))
    sampler = _Sampler(unit, None)
    return SampleSet(model.dims, sampler.draw(seed, stream, 0, S))


__all__ = ["Extraction", "SampleSet", "draw_samples", "extract", "extract_full"]
