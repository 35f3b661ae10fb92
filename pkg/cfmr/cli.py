#!/usr/bin/env python3
"""
Command-line surface

Exit codes: 0 success, 1 validation error, 2 data/format error, 3 numerical failure.
"""

import functools
import json
import logging
from pathlib import Path

import click

from cfmr.config import AnchorConfig, load_synthetic_spec, load_train_config, save_yaml
from cfmr.exceptions.custom_exceptions import CfmrError, ValidationError
from cfmr.main import create_app
from cfmr.services.corpus_service import generate_corpus, load_corpus, save_corpus
from cfmr.services.eval_service import evaluate, random_baseline, result_frame
from cfmr.services.experiment_service import ABLATIONS, run_ablation
from cfmr.services.export_service import export_concepts
from cfmr.services.flops_service import DEFAULT_SWEEP, concept_sweep, flops_report, length_sweep
from cfmr.services.index_service import MomentRetriever, build_index
from cfmr.services.model import load_model, save_model
from cfmr.services.training_service import train
from cfmr.utils.logger import new_run_id, setup_logging
from cfmr.utils.serialization import load_index, read_feature_file, save_index
from cfmr.utils.validators import parse_float_list, parse_int_list

logger = logging.getLogger(__name__)


class CommandError(click.ClickException):
    """Carries a domain error's exit code out of click"""

    def __init__(self, error: CfmrError):
        super().__init__(f"{error.error_code}: {error}")
        self.exit_code = error.exit_code


def handles_errors(f):
    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except CfmrError as e:
            logger.debug(f"command failed with {type(e).__name__}", exc_info=True)
            raise CommandError(e)

    return wrapper


def _emit_json(data) -> None:
    click.echo(json.dumps(data, sort_keys=False))


@click.group()
@click.option('--log-level', default='INFO', show_default=True,
              type=click.Choice(['DEBUG', 'INFO', 'WARNING', 'ERROR'], case_sensitive=False))
def cli(log_level):
    """Point-supervised video moment retrieval with concept indexes."""
    setup_logging(log_level)
    new_run_id()


@cli.command('gen-data')
@click.option('--spec', 'spec_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--out', 'out_dir', required=True, type=click.Path(file_okay=False))
@handles_errors
def gen_data(spec_path, out_dir):
    """Generate a synthetic point-annotated corpus."""
    corpus = generate_corpus(load_synthetic_spec(spec_path))
    save_corpus(corpus, Path(out_dir))
    _emit_json({'videos': len(corpus.videos), 'train': len(corpus.train), 'test': len(corpus.test),
                'out': str(out_dir)})


@cli.command('train')
@click.option('--config', 'config_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--data', 'data_dir', required=True, type=click.Path(exists=True, file_okay=False))
@click.option('--out', 'out_path', default='model.bin', show_default=True, type=click.Path(dir_okay=False))
@click.option('--log', 'log_path', default=None, type=click.Path(dir_okay=False),
              help='Epoch log (JSON lines); defaults to <out>.log.jsonl')
@click.option('--heldout', 'heldout_dir', default=None, type=click.Path(exists=True, file_okay=False),
              help='Corpus whose test split drives early stopping')
@click.option('--stoplist', 'stoplist_path', default=None, type=click.Path(exists=True, dir_okay=False),
              help='Function words, one per line; overrides those stored in vocab.json')
@handles_errors
def train_command(config_path, data_dir, out_path, log_path, heldout_dir, stoplist_path):
    """Train the concept encoders on point annotations."""
    cfg = load_train_config(config_path)
    stoplist = Path(stoplist_path) if stoplist_path else None
    corpus = load_corpus(Path(data_dir), stoplist)
    heldout, videos = None, dict(corpus.videos)
    if heldout_dir:
        heldout_corpus = load_corpus(Path(heldout_dir), stoplist)
        heldout = heldout_corpus.test
        videos.update(heldout_corpus.videos)

    log_path = Path(log_path) if log_path else Path(f"{out_path}.log.jsonl")
    result = train(corpus.train, videos, corpus.vocab, cfg, heldout=heldout, log_path=log_path)
    save_model(result.model, Path(out_path))
    save_yaml(cfg.to_dict(), Path(f"{out_path}.config.yaml"))
    _emit_json({'model': str(out_path), 'epochs': len(result.log), 'best_epoch': result.best_epoch,
                'fingerprint': result.model.fingerprint().hex(), 'log': str(log_path)})


@cli.command('build-index')
@click.option('--features', 'features_dir', required=True, type=click.Path(exists=True, file_okay=False))
@click.option('--model', 'model_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--out', 'out_path', required=True, type=click.Path(dir_okay=False))
@click.option('--centers', default=AnchorConfig.centers, show_default=True, type=int)
@click.option('--scales', default=AnchorConfig.scales, show_default=True, type=int)
@click.option('--vmax', default=AnchorConfig.v_max, show_default=True, type=float)
@click.option('--gamma', default=AnchorConfig.gamma, show_default=True, type=float)
@click.option('--workers', default=4, show_default=True, type=int)
@handles_errors
def build_index_command(features_dir, model_path, out_path, centers, scales, vmax, gamma, workers):
    """Encode every feature file under the inference anchor grid."""
    errors = AnchorConfig(gamma=gamma, v_max=vmax, scales=scales, centers=centers).validate()
    if errors:
        raise ValidationError('; '.join(errors))
    model = load_model(Path(model_path))
    videos = [read_feature_file(p) for p in sorted(Path(features_dir).glob('*.fea'))]
    index = build_index(videos, model, centers, scales, vmax, gamma, workers=workers)
    save_index(index, Path(out_path))
    _emit_json(index.header())


@cli.command('query')
@click.option('--index', 'index_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--model', 'model_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--video', 'video_id', default=None, help='Omit to search every indexed video (experimental)')
@click.option('--text', required=True)
@click.option('--topk', default=5, show_default=True, type=int)
@click.option('--nms', default=0.7, show_default=True, type=float)
@click.option('--sim-mode', default='rowwise', show_default=True, type=click.Choice(['rowwise', 'flat']))
@handles_errors
def query_command(index_path, model_path, video_id, text, topk, nms, sim_mode):
    """Rank moments for a text query (one JSON line per moment)."""
    model = load_model(Path(model_path))
    retriever = MomentRetriever(model, load_index(Path(index_path)), sim_mode)
    tokens = model.vocab.encode(text, max_length=model.cfg.l_Q)
    for moment in retriever.query(tokens, topk=topk, nms_iou=nms, video_id=video_id):
        _emit_json(moment.to_dict())


@cli.command('eval')
@click.option('--index', 'index_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--model', 'model_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--data', 'data_dir', required=True, type=click.Path(exists=True, file_okay=False))
@click.option('--topk', default='1,5', show_default=True)
@click.option('--iou', default='0.5,0.7', show_default=True)
@click.option('--nms', default=0.7, show_default=True, type=float)
@click.option('--baseline/--no-baseline', default=True, show_default=True,
              help='Also report the random-ranking baseline (20 shuffles)')
@handles_errors
def eval_command(index_path, model_path, data_dir, topk, iou, nms, baseline):
    """R@K, IoU=m on the test split (JSON, then CSV)."""
    ks, ms = parse_int_list(topk, 'topk'), parse_float_list(iou, 'iou')
    model, index = load_model(Path(model_path)), load_index(Path(index_path))
    samples = load_corpus(Path(data_dir)).test
    results = {'cfmr': evaluate(model, index, samples, ks, ms, nms)}
    if baseline:
        results['random'] = random_baseline(index, samples, ks, ms, nms)
    _emit_json({name: r.to_dict() for name, r in results.items()})
    click.echo(result_frame(results).to_csv(index=False), nl=False)


@cli.command('bench')
@click.option('--config', 'config_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--lengths', default=','.join(str(n) for n in DEFAULT_SWEEP), show_default=True)
@click.option('--concepts', default=None, help='l_C values for the concept-number sweep, e.g. 1,3,5,7')
@click.option('--csv', 'csv_path', default=None, type=click.Path(dir_okay=False),
              help='Write the l_V sweep here instead of stdout')
@handles_errors
def bench(config_path, lengths, concepts, csv_path):
    """Offline/online FLOPs and parameter counts."""
    cfg = load_train_config(config_path)
    _emit_json(flops_report(cfg.encoder, cfg.anchors, cfg.encoder.l_V).to_dict())
    sweep = length_sweep(cfg.encoder, cfg.anchors, parse_int_list(lengths, 'lengths'))
    if csv_path:
        sweep.to_csv(csv_path, index=False)
    else:
        click.echo(sweep.to_csv(index=False), nl=False)
    if concepts:
        click.echo(concept_sweep(cfg.encoder, cfg.anchors, parse_int_list(concepts, 'concepts'))
                   .to_csv(index=False), nl=False)


@cli.command('export-concepts')
@click.option('--index', 'index_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--out', 'out_path', required=True, type=click.Path(dir_okay=False))
@click.option('--model', 'model_path', default=None, type=click.Path(exists=True, dir_okay=False),
              help='With --data, also export the text concepts of the test queries')
@click.option('--data', 'data_dir', default=None, type=click.Path(exists=True, file_okay=False))
@handles_errors
def export_concepts_command(index_path, out_path, model_path, data_dir):
    """Write every concept vector to CSV for external projection."""
    index = load_index(Path(index_path))
    queries = {}
    if model_path and data_dir:
        model = load_model(Path(model_path))
        retriever = MomentRetriever(model, index)
        for n, sample in enumerate(load_corpus(Path(data_dir)).test):
            queries[f"q{n:05d}:{sample.video_id}"] = retriever.encode_query(sample.query)
    rows = export_concepts(index, Path(out_path), queries)
    _emit_json({'rows': rows, 'out': str(out_path)})


@cli.command('ablate')
@click.option('--config', 'config_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--data', 'data_dir', required=True, type=click.Path(exists=True, file_okay=False))
@click.option('--variants', default=','.join(ABLATIONS), show_default=True)
@click.option('--log-dir', default=None, type=click.Path(file_okay=False))
@handles_errors
def ablate(config_path, data_dir, variants, log_dir):
    """Train each loss-ablation variant and compare recall."""
    cfg = load_train_config(config_path)
    names = [v.strip() for v in variants.split(',') if v.strip()]
    if log_dir:
        Path(log_dir).mkdir(parents=True, exist_ok=True)
    results = run_ablation(load_corpus(Path(data_dir)), cfg, names, log_dir)
    _emit_json({name: r.to_dict() for name, r in results.items()})
    click.echo(result_frame(results).to_csv(index=False), nl=False)


@cli.command('serve')
@click.option('--host', default='0.0.0.0', show_default=True)
@click.option('--port', default=None, type=int, help='Defaults to PORT from the environment')
@click.option('--env', 'config_name', default='production', show_default=True,
              type=click.Choice(['development', 'production', 'testing']))
def serve(host, port, config_name):
    """Run the moment API with the Flask development server."""
    app = create_app(config_name)
    app.run(host=host, port=port or app.config['PORT'])


def main():
    cli()


if __name__ == '__main__':
    main()
