"""toklab: train BPE, WordPiece, and UnigramLM subword vocabularies and
evaluate how well their segmentations track human lexical-decision data."""

__version__ = "0.1.0"

from .errors import (DataError, InternalError, ModelFormatError, StatsError,
                     ToklabError, UsageError)
from .metrics import char_length, chunkability, num_tokens
from .textio import (ColumnSchema, Corpus, FrequencyTable, MorphemeInventory,
                     Stimulus, filter_rt_percentiles, load_corpus,
                     load_frequency_table, load_lexical_decision,
                     load_morpheme_inventory)
from .vocab import (Tokenization, TokenizerModel, TrainFlags, Vocabulary,
                    encode, export_token_list, import_external_vocab,
                    load_model, save_model)

__all__ = [
    "__version__",
    "ToklabError", "UsageError", "DataError", "ModelFormatError", "StatsError",
    "InternalError",
    "Corpus", "Stimulus", "ColumnSchema", "FrequencyTable", "MorphemeInventory",
    "load_corpus", "load_lexical_decision", "filter_rt_percentiles",
    "load_frequency_table", "load_morpheme_inventory",
    "Vocabulary", "Tokenization", "TokenizerModel", "TrainFlags",
    "encode", "save_model", "load_model", "import_external_vocab", "export_token_list",
    "chunkability", "num_tokens", "char_length",
]
