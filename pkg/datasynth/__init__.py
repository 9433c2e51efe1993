# Synthetic glyph-image datasets
from datasynth.dataset import Dataset, DatasetManifest, Sample, load_dataset, read_manifest, write_manifest
from datasynth.generate import gen_contextless, gen_lexicon, generate
from datasynth.render import render_string

__all__ = [
    "Dataset", "DatasetManifest", "Sample", "load_dataset", "read_manifest", "write_manifest",
    "gen_contextless", "gen_lexicon", "generate", "render_string",
]
