"""Reference extractor sidecar for the gnz pipeline.

Consumes a JSON manifest (labeled ids, optional certainty-weighted
pseudo-labels, ramp weight), trains or fine-tunes a small CNN with
cross-entropy on the labeled data plus ramp- and certainty-weighted
cross-entropy on the pseudo-labeled data, and writes penultimate-layer
activations for every item as a GNZE embedding file.
"""

from .config import SidecarConfig
from .train import run_manifest

__version__ = "0.1.0"
