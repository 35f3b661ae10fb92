"""
Train -> index -> evaluate runs, including the loss ablation variants
"""

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

from cfmr.config import TrainConfig
from cfmr.exceptions.custom_exceptions import ValidationError
from cfmr.models.domain import ConceptIndex, EvalResult
from cfmr.services.corpus_service import Corpus
from cfmr.services.eval_service import evaluate, log_result, random_baseline
from cfmr.services.index_service import build_index
from cfmr.services.model import CFMRModel
from cfmr.services.training_service import TrainResult, train

logger = logging.getLogger(__name__)

ABLATIONS: Dict[str, Tuple[str, ...]] = {
    'full': (),
    'no_conc': ('conc',),
    'no_cma': ('cma',),
    'no_rec_pcl': ('rec', 'pcl'),
}


@dataclass
class ExperimentResult:
    training: TrainResult
    index: ConceptIndex
    result: EvalResult

    @property
    def model(self) -> CFMRModel:
        return self.training.model


def index_corpus_tests(model: CFMRModel, corpus: Corpus, cfg: TrainConfig) -> ConceptIndex:
    return build_index(corpus.test_videos(), model, cfg.anchors.centers, cfg.anchors.scales,
                       cfg.anchors.v_max, cfg.anchors.gamma, workers=cfg.workers)


def run_experiment(corpus: Corpus, cfg: TrainConfig, log_path: Optional[Path] = None) -> ExperimentResult:
    if not corpus.test:
        raise ValidationError('corpus has no test samples to evaluate on')
    training = train(corpus.train, corpus.videos, corpus.vocab, cfg, log_path=log_path)
    index = index_corpus_tests(training.model, corpus, cfg)
    result = evaluate(training.model, index, corpus.test, cfg.eval_topk, cfg.eval_iou,
                      cfg.nms_iou, cfg.sim_mode)
    return ExperimentResult(training=training, index=index, result=result)


def run_ablation(corpus: Corpus, cfg: TrainConfig, variants: Sequence[str] = tuple(ABLATIONS),
                 log_dir: Optional[Path] = None) -> Dict[str, EvalResult]:
    """Train every variant from the same seed on the same corpus"""
    unknown = [v for v in variants if v not in ABLATIONS]
    if unknown:
        raise ValidationError(f"unknown ablation variants {unknown}; choose from {sorted(ABLATIONS)}")

    results: Dict[str, EvalResult] = {}
    last_index = None
    for name in variants:
        variant = replace(cfg, disabled_losses=ABLATIONS[name])
        log_path = Path(log_dir) / f"{name}.jsonl" if log_dir else None
        logger.info(f"Ablation '{name}': disabled losses {list(ABLATIONS[name]) or 'none'}")
        experiment = run_experiment(corpus, variant, log_path)
        results[name], last_index = experiment.result, experiment.index
        log_result(name, results[name])

    if last_index is not None:
        # only the anchor grid and durations are used
        results['random'] = random_baseline(last_index, corpus.test, cfg.eval_topk, cfg.eval_iou,
                                            cfg.nms_iou, seed=cfg.seed)
    return results
