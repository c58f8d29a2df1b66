from pathlib import Path

import pytest

from offlang.normalize import NormalizerConfig

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def default_config() -> NormalizerConfig:
    return NormalizerConfig.default()


@pytest.fixture(scope="session")
def toy_config() -> NormalizerConfig:
    # small closed tables so properties are easy to reason about
    return NormalizerConfig(
        contraction_table={
            "isn't": "is not",
            "can't": "can not",
            "you're": "you are",
            "they'd've": "they would have",
        },
        emoji_table={":))": "smile smile", ":)": "smile", ":(": "frown"},
        hashtag_lexicon={
            "dinner": 120, "time": 3500, "maga": 40, "2020": 60,
            "fake": 90, "news": 280, "a": 9000, "i": 3000, "win": 150, "now": 540,
        },
        max_user_run=3,
    )
