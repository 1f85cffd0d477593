"""Cross-lingual image captioning from machine-translated text.

The pipeline: estimate per-sentence fluency with a four-view recurrent
classifier, then train a feature-conditioned caption generator while
filtering, sampling, or down-weighting training sentences by their
fluency score.  Evaluation uses BLEU-4, ROUGE-L and CIDEr; an HTTP
service plus browser UI support the human grading and rating workflows.
"""

__version__ = "0.1.0"
