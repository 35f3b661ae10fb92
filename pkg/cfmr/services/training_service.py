"""
Point-supervised training loop

Per sample: anchors from the annotated point, one batched video pass over
positives, negatives and the whole video, one text pass, one reconstructor
pass over every concept set, then the four-part objective. Gradients are
averaged over the batch before each Adam step.
"""

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np

from cfmr.config import TrainConfig
from cfmr.exceptions.custom_exceptions import NumericalError, ValidationError
from cfmr.kernel.optim import Adam
from cfmr.kernel.tensor import Tensor, concat
from cfmr.models.domain import FeatureSequence, IntervalSample, PointSample, ReconLossTriple
from cfmr.services.anchors import training_anchor_set, weight_matrix
from cfmr.services.encoders import diversity_loss
from cfmr.services.eval_service import evaluate
from cfmr.services.index_service import build_index
from cfmr.services.losses import cma_loss, total_loss
from cfmr.services.model import CFMRModel
from cfmr.services.reconstructor import (
    mask_query, masked_nll, pcl_loss, reconstruction_accuracy, select_optimal_anchor,
)
from cfmr.services.vocabulary import Vocabulary

logger = logging.getLogger(__name__)

LOG_KEYS = ('L_conc', 'L_rec', 'L_pcl', 'L_cma', 'L_total')


@dataclass
class SampleObjective:
    """Loss components of one sample (graph-attached) plus diagnostics"""
    conc: Tensor
    cma: Tensor
    rec: Tensor
    pcl: Tensor
    total: Tensor
    optimal: int
    rec_acc: float

    def floats(self) -> Dict[str, float]:
        return {
            'L_conc': self.conc.item(),
            'L_cma': self.cma.item(),
            'L_rec': self.rec.item(),
            'L_pcl': self.pcl.item(),
            'L_total': self.total.item(),
        }


@dataclass
class TrainResult:
    model: CFMRModel
    log: List[Dict] = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False


def mask_rng(seed: int, epoch: int, sample_index: int) -> np.random.Generator:
    return np.random.default_rng([seed, epoch, sample_index])


def sample_objective(model: CFMRModel, sample: PointSample, video: FeatureSequence,
                     cfg: TrainConfig, rng: np.random.Generator) -> SampleObjective:
    """Build the full objective for one point-annotated sample"""
    anchors = training_anchor_set(sample.point, cfg.anchors.v_max, cfg.anchors.scales,
                                  l_V=video.length, min_segment=cfg.anchors.min_segment)
    positives, negatives = anchors.positives, anchors.negatives
    n_pos, n_neg = len(positives), len(negatives)
    whole = n_pos + n_neg

    weights = weight_matrix(positives + negatives, video.length, cfg.anchors.gamma, whole_video=True)
    query_concepts, _ = model.text(sample.query)
    video_concepts = model.video(video.features, weights)  # (n_pos + n_neg + 1, l_C, d_h)

    masked = mask_query(sample.query, cfg.mask_ratio, rng)
    l_C, d_h = query_concepts.shape
    concept_sets = concat([video_concepts, query_concepts.reshape(1, l_C, d_h)], axis=0)
    logits = model.reconstructor.logits(concept_sets, model.text.word_features(masked.ids))
    nll = masked_nll(logits.log_softmax(axis=-1), masked)

    optimal = select_optimal_anchor(positives, nll.data[:n_pos])
    nll_optimal = nll[optimal]
    nll_negative = nll[n_pos:whole].mean() if n_neg else None
    rec = nll_optimal + nll[whole + 1]
    pcl = pcl_loss(ReconLossTriple(nll_optimal, nll_negative, nll[whole]), cfg.alpha1, cfg.alpha2)

    optimal_concepts = video_concepts[optimal]
    cma = cma_loss(optimal_concepts, video_concepts[n_pos:whole] if n_neg else None,
                   video_concepts[whole], query_concepts, cfg.alpha3, cfg.alpha4, cfg.sim_mode)
    conc = diversity_loss(optimal_concepts) + diversity_loss(query_concepts)

    parts = {'conc': conc, 'cma': cma, 'rec': rec, 'pcl': pcl}
    for name, part in parts.items():
        if not np.all(np.isfinite(part.data)):
            raise NumericalError(f"L_{name} is not finite for video {sample.video_id}")
    active = {name: (Tensor(0.0) if name in cfg.disabled_losses else part) for name, part in parts.items()}
    total = total_loss(active['conc'], active['cma'], active['rec'], active['pcl'], cfg.beta1, cfg.beta2)

    return SampleObjective(conc=conc, cma=cma, rec=rec, pcl=pcl, total=total, optimal=optimal,
                           rec_acc=reconstruction_accuracy(logits[optimal], masked))


def _dump_diagnostics(out_dir: Optional[Path], epoch: int, batch: Sequence[PointSample], error: str) -> str:
    record = {
        'epoch': epoch,
        'error': error,
        'batch': [{'video_id': s.video_id, 'point': s.point, 'tokens': s.query.ids.tolist()} for s in batch],
    }
    if out_dir is None:
        return json.dumps(record)
    path = Path(out_dir) / f"nan_dump_epoch{epoch}.json"
    path.write_text(json.dumps(record, indent=2), encoding='utf-8')
    return str(path)


def heldout_recall(model: CFMRModel, videos: Mapping[str, FeatureSequence],
                   samples: Sequence[IntervalSample], cfg: TrainConfig) -> float:
    """R@1 at the first configured IoU on a temporary index over the held-out videos"""
    ids = dict.fromkeys(s.video_id for s in samples)
    index = build_index([videos[v] for v in ids], model, cfg.anchors.centers, cfg.anchors.scales,
                        cfg.anchors.v_max, cfg.anchors.gamma, workers=cfg.workers)
    m = cfg.eval_iou[0]
    result = evaluate(model, index, samples, topk=(1,), ious=(m,), nms_iou=cfg.nms_iou,
                      sim_mode=cfg.sim_mode)
    return result.recall[(1, m)]


def train(
        samples: Sequence[PointSample],
        videos: Mapping[str, FeatureSequence],
        vocab: Vocabulary,
        cfg: TrainConfig,
        heldout: Optional[Sequence[IntervalSample]] = None,
        log_path: Optional[Path] = None,
        model: Optional[CFMRModel] = None,
        trainable: Optional[Callable[[str], bool]] = None
) -> TrainResult:
    """
    Train on point-annotated samples

    Args:
        samples: training corpus, one point per sample
        videos: features by video id
        heldout: optional interval-annotated split used for early stopping
        log_path: JSONL file receiving one record per epoch
        model: continue from this model instead of a fresh seeded one
        trainable: predicate over parameter names; others stay frozen

    Returns:
        TrainResult holding the best-scoring parameters (last epoch without a held-out split)
    """
    if not samples:
        raise ValidationError('training corpus is empty')
    errors = cfg.validate()
    if errors:
        raise ValidationError('Invalid train config: ' + '; '.join(errors))
    for sample in samples:
        if sample.video_id not in videos:
            raise ValidationError(f"sample refers to unknown video '{sample.video_id}'")

    if model is None:
        model = CFMRModel(cfg.encoder, vocab, seed=cfg.seed)
    params = [p for n, p in model.named_parameters() if trainable is None or trainable(n)]
    if not params:
        raise ValidationError('no trainable parameters selected')
    optimizer = Adam(params, learning_rate=cfg.learning_rate)

    log_file = None
    if log_path is not None:
        Path(log_path).parent.mkdir(parents=True, exist_ok=True)
        log_file = open(log_path, 'w', encoding='utf-8')

    result = TrainResult(model=model)
    best_score, best_state, stale_epochs = -1.0, None, 0
    order_rng = np.random.default_rng(cfg.seed)
    try:
        for epoch in range(1, cfg.epochs + 1):
            started = time.perf_counter()
            order = order_rng.permutation(len(samples))
            sums = dict.fromkeys(LOG_KEYS, 0.0)
            accuracy = 0.0

            for start in range(0, len(order), cfg.batch_size):
                batch_ids = order[start:start + cfg.batch_size]
                batch = [samples[i] for i in batch_ids]
                model.zero_grad()
                try:
                    for i, sample in zip(batch_ids, batch):
                        objective = sample_objective(model, sample, videos[sample.video_id], cfg,
                                                     mask_rng(cfg.seed, epoch, int(i)))
                        if objective.total.requires_grad:
                            (objective.total * (1.0 / len(batch))).backward()
                        for key, value in objective.floats().items():
                            sums[key] += value
                        accuracy += objective.rec_acc
                except NumericalError as e:
                    where = _dump_diagnostics(Path(log_path).parent if log_path else None, epoch, batch, str(e))
                    raise NumericalError(f"{e}; diagnostics: {where}")
                optimizer.step()
                logger.debug(f"epoch {epoch} batch {start // cfg.batch_size}: "
                             f"L_total={sums['L_total'] / (start + len(batch)):.4f}")

            record: Dict = {'epoch': epoch}
            record.update({k: v / len(samples) for k, v in sums.items()})
            record['rec_acc'] = accuracy / len(samples)
            record['heldout_r1'] = heldout_recall(model, videos, heldout, cfg) if heldout else None
            result.log.append(record)
            if log_file is not None:
                log_file.write(json.dumps(record) + '\n')
                log_file.flush()
            logger.info(
                f"epoch {epoch}/{cfg.epochs} L_total={record['L_total']:.4f} "
                f"rec_acc={record['rec_acc']:.3f} heldout_r1={record['heldout_r1']} "
                f"({time.perf_counter() - started:.1f}s)"
            )

            if heldout:
                if record['heldout_r1'] > best_score:
                    best_score, best_state, stale_epochs = record['heldout_r1'], model.state_dict(), 0
                    result.best_epoch = epoch
                else:
                    stale_epochs += 1
                    if stale_epochs >= cfg.patience:
                        logger.info(f"Early stop after epoch {epoch}; best epoch {result.best_epoch}")
                        result.stopped_early = True
                        break
            else:
                result.best_epoch = epoch
    finally:
        if log_file is not None:
            log_file.close()

    if best_state is not None:
        model.load_state_dict(best_state)
    return result
