"""Multi-label text classification with a BiLSTM encoder and multi-head
graph attention over a learnable label-correlation graph."""

__version__ = "0.1.0"
