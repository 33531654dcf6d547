"""Shared fixtures: toy documents and a deterministic synthetic corpus."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import pytest

TOPIC_WORDS = {
    "econ": ["market", "stocks", "inflation", "bank", "economy", "trade", "budget"],
    "health": ["virus", "vaccine", "hospital", "doctors", "outbreak", "patients", "cure"],
    "sport": ["match", "season", "coach", "playoffs", "striker", "stadium", "goal"],
    "tech": ["startup", "software", "chip", "robot", "encryption", "network", "cloud"],
}
FILLER_WORDS = ["report", "officials", "claims", "sources", "yesterday", "city", "group"]
CUE_WORDS = {
    "agree": ["confirmed", "true", "verified"],
    "disagree": ["denied", "false", "hoax"],
    "discuss": ["allegedly", "reportedly", "rumor"],
}


def write_mini_corpus(
    target: Path, n_pairs: int = 200, n_bodies: int = 40, seed: int = 7
) -> tuple[Path, Path]:
    """Write a small learnable corpus in the FNC-1 file format.

    Bodies are topic-pure word soups; related headlines reuse the body's
    topic vocabulary plus stance cue words, unrelated headlines draw from
    a different topic. Deterministic for a given seed.
    """
    rng = np.random.default_rng(seed)
    topics = sorted(TOPIC_WORDS)

    def sentence(words: list[str], n: int) -> str:
        pool = words + FILLER_WORDS
        return " ".join(pool[rng.integers(len(pool))] for _ in range(n))

    bodies: dict[int, str] = {}
    body_topic: dict[int, str] = {}
    for body_id in range(n_bodies):
        topic = topics[rng.integers(len(topics))]
        body_topic[body_id] = topic
        bodies[body_id] = sentence(TOPIC_WORDS[topic], 60) + "."

    stance_cycle = ["agree", "disagree", "discuss", "unrelated"]
    rows = []
    for i in range(n_pairs):
        body_id = int(rng.integers(n_bodies))
        stance = stance_cycle[i % 4]
        if stance == "unrelated":
            others = [t for t in topics if t != body_topic[body_id]]
            headline = sentence(TOPIC_WORDS[others[rng.integers(len(others))]], 8)
        else:
            cues = CUE_WORDS[stance]
            headline = (
                sentence(TOPIC_WORDS[body_topic[body_id]], 6)
                + " "
                + cues[rng.integers(len(cues))]
                + " "
                + cues[rng.integers(len(cues))]
            )
        rows.append((headline, body_id, stance))

    bodies_path = target / "bodies.csv"
    stances_path = target / "stances.csv"
    with bodies_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["Body ID", "articleBody"])
        for body_id in sorted(bodies):
            writer.writerow([body_id, bodies[body_id]])
    with stances_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["Headline", "Body ID", "Stance"])
        for headline, body_id, stance in rows:
            writer.writerow([headline, body_id, stance])
    return bodies_path, stances_path


@pytest.fixture(scope="session")
def mini_corpus(tmp_path_factory) -> tuple[Path, Path]:
    """(bodies.csv, stances.csv) of the 200-pair synthetic corpus."""
    target = tmp_path_factory.mktemp("mini_corpus")
    return write_mini_corpus(target)


@pytest.fixture(scope="session")
def trained_bundle(tmp_path_factory, mini_corpus) -> Path:
    """One trained bundle over the mini corpus, shared across tests."""
    from stancekit.pipeline import PipelineConfig, run_train
    import io

    bodies_path, stances_path = mini_corpus
    out_dir = tmp_path_factory.mktemp("trained")
    config = PipelineConfig(
        bodies=str(bodies_path),
        stances=str(stances_path),
        out_dir=str(out_dir),
        k_max=32,
        seed=0,
        holdout_frac=0.1,
        batch_size=32,
        epochs=10,
        stage2_epochs=5,
    )
    run_train(config, out=io.StringIO())
    return out_dir / "bundle"
