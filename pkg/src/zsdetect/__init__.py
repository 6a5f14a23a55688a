"""Zero-shot object detection toolkit.

Grid-based single-shot detector with an extended per-anchor output block
that predicts a class-embedding vector next to boxes, objectness and
seen-class scores. At inference time unseen classes are scored through
two routes (convex combination of seen-class embeddings, and the directly
predicted region embedding) fused by a softmax.
"""

__version__ = "0.1.0"

CHECKPOINT_FORMAT_VERSION = 1
