"""
Command line: the gen-data -> train -> build-index -> query/eval chain and exit codes
"""

import json

import pandas as pd
import pytest
import yaml
from click.testing import CliRunner

from cfmr.cli import cli
from cfmr.services.model import load_model
from tests.conftest import SMALL_ANCHORS, SMALL_ENCODER, SMALL_SPEC


def invoke(*args):
    return CliRunner().invoke(cli, ['--log-level', 'ERROR', *[str(a) for a in args]])


def json_lines(output):
    return [json.loads(line) for line in output.splitlines() if line.startswith('{')]


@pytest.fixture(scope='module')
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp('cli')
    spec = {**SMALL_SPEC, 'event_length': list(SMALL_SPEC['event_length']),
            'duration': list(SMALL_SPEC['duration'])}
    (root / 'spec.yaml').write_text(yaml.safe_dump(spec), encoding='utf-8')
    train_cfg = {'encoder': SMALL_ENCODER, 'anchors': SMALL_ANCHORS, 'epochs': 1, 'batch_size': 4,
                 'workers': 2, 'eval_iou': [0.3, 0.5]}
    (root / 'train.yaml').write_text(yaml.safe_dump(train_cfg), encoding='utf-8')

    result = invoke('gen-data', '--spec', root / 'spec.yaml', '--out', root / 'data')
    assert result.exit_code == 0, result.output
    result = invoke('train', '--config', root / 'train.yaml', '--data', root / 'data',
                    '--out', root / 'model.bin')
    assert result.exit_code == 0, result.output
    result = invoke('build-index', '--features', root / 'data' / 'features', '--model', root / 'model.bin',
                    '--out', root / 'index.bin', '--centers', 4, '--scales', 2, '--vmax', 0.5, '--workers', 2)
    assert result.exit_code == 0, result.output
    return root


class TestPipeline:
    def test_generated_corpus(self, workspace):
        assert (workspace / 'data' / 'vocab.json').exists()
        assert len(list((workspace / 'data' / 'features').glob('*.fea'))) == 12

    def test_training_outputs(self, workspace):
        assert (workspace / 'model.bin').exists()
        log = [json.loads(line) for line in
               (workspace / 'model.bin.log.jsonl').read_text(encoding='utf-8').splitlines()]
        assert len(log) == 1
        saved = yaml.safe_load((workspace / 'model.bin.config.yaml').read_text(encoding='utf-8'))
        assert saved['epochs'] == 1
        assert saved['encoder']['l_V'] == 12

    def test_build_index_header(self, workspace):
        result = invoke('build-index', '--features', workspace / 'data' / 'features',
                        '--model', workspace / 'model.bin', '--out', workspace / 'index2.bin',
                        '--centers', 4, '--scales', 2, '--vmax', 0.5, '--workers', 1)
        header = json_lines(result.stdout)[0]
        assert header['videos'] == 12
        assert header['entries'] == 12 * 8
        assert (workspace / 'index2.bin').read_bytes() == (workspace / 'index.bin').read_bytes()

    def test_query_one_video(self, workspace):
        result = invoke('query', '--index', workspace / 'index.bin', '--model', workspace / 'model.bin',
                        '--video', 'test_00000', '--text', 'f0 c0 f1 c1', '--topk', 3)
        assert result.exit_code == 0, result.output
        moments = json_lines(result.stdout)
        assert 1 <= len(moments) <= 3
        assert {m['video_id'] for m in moments} == {'test_00000'}
        assert all(m['t_start'] < m['t_end'] for m in moments)

    def test_eval_prints_json_then_csv(self, workspace):
        result = invoke('eval', '--index', workspace / 'index.bin', '--model', workspace / 'model.bin',
                        '--data', workspace / 'data', '--topk', '1,5', '--iou', '0.3,0.5')
        assert result.exit_code == 0, result.output
        lines = result.stdout.splitlines()
        summary = json.loads(lines[0])
        assert set(summary) == {'cfmr', 'random'}
        assert summary['cfmr']['samples'] == 8
        assert lines[1].startswith('run,')
        assert len(lines) == 4

    def test_bench(self, workspace):
        csv_path = workspace / 'sweep.csv'
        result = invoke('bench', '--config', workspace / 'train.yaml', '--lengths', '10,20,40',
                        '--csv', csv_path)
        assert result.exit_code == 0, result.output
        report = json_lines(result.stdout)[0]
        assert report['anchors'] == 8
        frame = pd.read_csv(csv_path)
        assert list(frame['l_V']) == [10, 20, 40]

    def test_export_concepts(self, workspace):
        out = workspace / 'concepts.csv'
        result = invoke('export-concepts', '--index', workspace / 'index.bin', '--out', out,
                        '--model', workspace / 'model.bin', '--data', workspace / 'data')
        assert result.exit_code == 0, result.output
        rows = json_lines(result.stdout)[0]['rows']
        assert rows == 12 * 8 * 2 + 8 * 2
        assert len(pd.read_csv(out)) == rows

    def test_train_with_stoplist(self, workspace, tmp_path):
        stoplist = tmp_path / 'stop.txt'
        stoplist.write_text('f0\nf1\nf2\nc0\n', encoding='utf-8')
        result = invoke('train', '--config', workspace / 'train.yaml', '--data', workspace / 'data',
                        '--out', tmp_path / 'm.bin', '--stoplist', stoplist)
        assert result.exit_code == 0, result.output
        vocab = load_model(tmp_path / 'm.bin').vocab
        assert vocab.function_words == frozenset({'f0', 'f1', 'f2', 'c0'})

    def test_missing_stoplist_is_a_usage_error(self, workspace, tmp_path):
        result = invoke('train', '--config', workspace / 'train.yaml', '--data', workspace / 'data',
                        '--out', tmp_path / 'm.bin', '--stoplist', tmp_path / 'absent.txt')
        assert result.exit_code == 2


class TestExitCodes:
    def test_invalid_config_exits_1(self, workspace, tmp_path):
        bad = tmp_path / 'bad.yaml'
        bad.write_text(yaml.safe_dump({'alpha1': 0.05, 'alpha2': 0.1}), encoding='utf-8')
        result = invoke('train', '--config', bad, '--data', workspace / 'data', '--out', tmp_path / 'm.bin')
        assert result.exit_code == 1
        assert 'validation_error' in result.output

    def test_unknown_video_exits_1(self, workspace):
        result = invoke('query', '--index', workspace / 'index.bin', '--model', workspace / 'model.bin',
                        '--video', 'nope', '--text', 'f0 c0')
        assert result.exit_code == 1

    def test_corrupt_index_exits_2(self, workspace, tmp_path):
        broken = tmp_path / 'broken.bin'
        broken.write_bytes(b'not an index at all')
        result = invoke('query', '--index', broken, '--model', workspace / 'model.bin', '--text', 'f0 c0')
        assert result.exit_code == 2

    def test_bad_list_option_exits_1(self, workspace):
        result = invoke('eval', '--index', workspace / 'index.bin', '--model', workspace / 'model.bin',
                        '--data', workspace / 'data', '--topk', 'one')
        assert result.exit_code == 1
