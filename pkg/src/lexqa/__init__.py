"""lexqa: hybrid retrieval/ensemble question answering with reviewed knowledge write-back."""

__version__ = "0.1.0"
