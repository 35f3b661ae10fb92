"""
CFMR model container and persistence
"""

import hashlib
import io
import json
from dataclasses import asdict
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np

from cfmr.config import EncoderConfig
from cfmr.exceptions.custom_exceptions import ConfigurationError, DataFormatError
from cfmr.kernel.layers import Module, Parameter
from cfmr.services.encoders import TextConceptEncoder, VideoConceptEncoder
from cfmr.services.reconstructor import SemanticReconstructor
from cfmr.services.vocabulary import Vocabulary

MODEL_FORMAT = 'cfmr-model-1'


class CFMRModel(Module):
    """Text encoder, video encoder and the training-only reconstructor"""

    def __init__(self, cfg: EncoderConfig, vocab: Vocabulary, seed: int = 0):
        errors = cfg.validate()
        if errors:
            raise ConfigurationError('Invalid encoder config: ' + '; '.join(errors))
        if len(vocab) != cfg.vocab_size:
            raise ConfigurationError(
                f"vocabulary has {len(vocab)} tokens but encoder.vocab_size is {cfg.vocab_size}"
            )
        self.cfg = cfg
        self.vocab = vocab
        rng = np.random.default_rng(seed)
        self.text = TextConceptEncoder(cfg, rng)
        self.video = VideoConceptEncoder(cfg, rng)
        self.reconstructor = SemanticReconstructor(cfg, rng)

    def encoder_parameters(self) -> List[Tuple[str, Parameter]]:
        return [(n, p) for n, p in self.named_parameters() if not n.startswith('reconstructor.')]

    def fingerprint(self) -> bytes:
        """SHA-256 over the encoder parameters (names, shapes, float64 bytes)"""
        digest = hashlib.sha256()
        for name, p in self.encoder_parameters():
            digest.update(name.encode('utf-8'))
            digest.update(np.asarray(p.shape, dtype='<i8').tobytes())
            digest.update(np.ascontiguousarray(p.data, dtype='<f8').tobytes())
        return digest.digest()


def save_model(model: CFMRModel, path: Path) -> None:
    arrays: Dict[str, np.ndarray] = {f"param/{n}": p.data for n, p in model.named_parameters()}
    arrays['meta/format'] = np.array(MODEL_FORMAT)
    arrays['meta/config'] = np.array(json.dumps(asdict(model.cfg)))
    arrays['meta/vocab'] = np.array(json.dumps(model.vocab.to_dict()))
    arrays['meta/fingerprint'] = np.array(model.fingerprint().hex())
    buffer = io.BytesIO()
    np.savez(buffer, **arrays)
    Path(path).write_bytes(buffer.getvalue())


def load_model(path: Path) -> CFMRModel:
    try:
        with np.load(Path(path), allow_pickle=False) as archive:
            data = {key: archive[key] for key in archive.files}
    except FileNotFoundError:
        raise DataFormatError(f"model file not found: {path}")
    except (OSError, ValueError) as e:
        raise DataFormatError(f"{path} is not a CFMR model archive: {e}")

    if str(data.get('meta/format', '')) != MODEL_FORMAT:
        raise DataFormatError(f"{path} is not a {MODEL_FORMAT} archive")

    cfg = EncoderConfig(**json.loads(str(data['meta/config'])))
    vocab = Vocabulary.from_dict(json.loads(str(data['meta/vocab'])))
    model = CFMRModel(cfg, vocab)
    model.load_state_dict({k[len('param/'):]: v for k, v in data.items() if k.startswith('param/')})

    if model.fingerprint().hex() != str(data['meta/fingerprint']):
        raise DataFormatError(f"{path}: parameters do not match the stored fingerprint")
    return model
