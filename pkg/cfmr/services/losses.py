"""
Concept similarity and the alignment / total objectives
"""

from typing import Optional

import numpy as np

from cfmr.exceptions.custom_exceptions import DimensionError, ValidationError
from cfmr.kernel.tensor import ArrayLike, Tensor, as_tensor

_NORM_EPS = 1e-20


def _cosine_rows(a: Tensor, b: Tensor) -> Tensor:
    dots = (a * b).sum(axis=-1)
    norms = ((a * a).sum(axis=-1) * (b * b).sum(axis=-1) + _NORM_EPS).sqrt()
    return dots / norms


def sim(Ca: ArrayLike, Cb: ArrayLike, mode: str = 'rowwise') -> Tensor:
    """
    Similarity of two concept sets

    rowwise: mean over concept index c of cosine(Ca_c, Cb_c)
    flat:    cosine of the flattened sets
    Zero vectors contribute similarity 0. Leading batch axes broadcast.
    """
    Ca, Cb = as_tensor(Ca), as_tensor(Cb)
    if Ca.shape[-2:] != Cb.shape[-2:]:
        raise DimensionError(f"concept sets differ in shape: {Ca.shape} vs {Cb.shape}")
    if mode == 'rowwise':
        return _cosine_rows(Ca, Cb).mean(axis=-1)
    if mode == 'flat':
        rows, dim = Ca.shape[-2:]
        return _cosine_rows(Ca.reshape(*Ca.shape[:-2], rows * dim),
                            Cb.reshape(*Cb.shape[:-2], rows * dim))
    raise ValidationError(f"unknown similarity mode '{mode}'")


def mse(a: ArrayLike, b: ArrayLike) -> Tensor:
    diff = as_tensor(a) - b
    return (diff * diff).mean()


def cma_loss(
        C_opt: ArrayLike,
        C_neg: Optional[ArrayLike],
        C_whole: ArrayLike,
        C_q: ArrayLike,
        alpha3: float,
        alpha4: float,
        mode: str = 'rowwise'
) -> Tensor:
    """
    max(SIM(N, q) - SIM(O, q) + α3, 0) + max(SIM(R, q) - SIM(O, q) + α4, 0) + MSE(O, q)

    Args:
        C_neg: (k, l_C, d_h) negative-anchor concepts (similarity averaged over k),
            or None when the sample has no negative anchor
    """
    if alpha3 < 0 or alpha4 < 0:
        raise ValidationError('cma margins must be >= 0')
    C_opt, C_q = as_tensor(C_opt), as_tensor(C_q)
    sim_opt = sim(C_opt, C_q, mode)
    loss = (sim(C_whole, C_q, mode) - sim_opt + alpha4).relu() + mse(C_opt, C_q)
    if C_neg is not None:
        sim_neg = sim(C_neg, C_q, mode).mean()
        loss = (sim_neg - sim_opt + alpha3).relu() + loss
    return loss


def total_loss(conc: ArrayLike, cma: ArrayLike, rec: ArrayLike, pcl: ArrayLike,
               beta1: float, beta2: float) -> Tensor:
    """L_conc + L_cma + β1 L_rec + β2 L_pcl"""
    parts = [as_tensor(p) for p in (conc, cma, rec, pcl)]
    if not all(np.all(np.isfinite(p.data)) for p in parts):
        raise ValidationError('loss components must be finite')
    return parts[0] + parts[1] + parts[2] * beta1 + parts[3] * beta2


def concept_similarity(index_concepts: np.ndarray, query_concepts: np.ndarray,
                       mode: str = 'rowwise') -> np.ndarray:
    """Graph-free sim() of many anchors' concepts (A, l_C, d_h) against one query set"""
    a = np.asarray(index_concepts, dtype=np.float64)
    q = np.asarray(query_concepts, dtype=np.float64)
    if mode == 'flat':
        a = a.reshape(a.shape[0], 1, -1)
        q = q.reshape(1, -1)
    dots = np.einsum('acd,cd->ac', a, q)
    norms = np.sqrt(np.sum(a * a, axis=-1) * np.sum(q * q, axis=-1) + _NORM_EPS)
    return np.mean(dots / norms, axis=-1)
