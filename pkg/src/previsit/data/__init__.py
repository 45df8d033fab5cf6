from pathlib import Path


def bundled_corpus_path() -> Path:
    """Path of the 12-record synthetic EMR corpus shipped with the package."""
    return Path(__file__).with_name("synthetic_emr.jsonl")
