"""
Saving models and exporting what they learned
==============================================

Checkpoints are a small self-describing binary: the architecture travels
with the weights, so loading needs no side channel. Bottleneck embeddings
export as a plain text table, one row per clip, ready for plotting.
"""

import tempfile
from pathlib import Path

import numpy as np

from artistid.crnn import CrnnConfig, build_model, load_checkpoint, save_checkpoint
from artistid.datasets import ClipSet
from artistid.evaluation import export_embeddings, read_embeddings

out = Path(tempfile.mkdtemp(prefix="artistid_demo_"))
config = CrnnConfig(n_mels=16, n_classes=3, conv_channels=(4, 8),
                    pools=((4, 2), (4, 2)), gru_units=(8, 8))
model = build_model(config, seed=0)
model.metadata = {"epoch": "0", "note": "untrained demo model"}

rng = np.random.default_rng(1)
x = rng.standard_normal((4, 1, 16, 8)).astype(np.float32)
before, _ = model.forward(x, train=False)

path = out / "model.ckpt"
save_checkpoint(model, path)
print(f"checkpoint: {path} ({path.stat().st_size} bytes)")

loaded = load_checkpoint(path)
after, _ = loaded.forward(x, train=False)
print(f"logits identical after reload: {np.array_equal(before, after)}")
print(f"metadata came along: {loaded.metadata}")

# the embedding table: track, artist, clip index, then the bottleneck vector
clips = ClipSet(x, np.array([0, 1, 2, 0]),
                provenance=[(10, 0), (11, 0), (12, 0), (10, 1)])
table = out / "embeddings.tsv"
count = export_embeddings(loaded, clips, table, class_names=["ada", "bix", "cab"])
print(f"\nwrote {count} embedding rows")
for record in read_embeddings(table)[:2]:
    head = ", ".join(f"{v:.3f}" for v in record.vector[:4])
    print(f"  track {record.track_id} ({record.artist}) clip {record.clip_index}: "
          f"[{head}, ...]")
