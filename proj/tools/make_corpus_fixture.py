#!/usr/bin/env python3
# Copyright 2026 The Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Writes data/corpus_fixture.csv, a synthetic two-topic comment corpus.

Each row is a comment with eleven text-quality features: five classifier
scores (emotion, hate, irony, offensive, sentiment), five readability indices
driven by a shared complexity factor, and a relevance score to the parent
post. Comments are grouped by parent post, five per post.

The two topics differ in where their variation lives. In "askvet" comments
under one post mostly differ in tone; in "askphilosophy" they mostly differ
in complexity and relevance.
"""

import argparse
import csv
import pathlib

import numpy as np

FEATURES = [
    "emotion", "hate", "irony", "offensive", "sentiment",
    "fk_grade", "fk_ease", "dale_chall", "coleman_liau", "ari",
    "relevance",
]

# (tone spread, complexity mean, complexity spread, relevance spread)
TOPICS = {
    "askvet": (1.0, 0.0, 0.25, 0.25),
    "askphilosophy": (0.25, 1.5, 1.0, 1.0),
}

# Loadings of the readability indices on the complexity factor; reading ease
# falls as complexity rises.
LOADINGS = np.array([1.0, -0.9, 0.8, 0.85, 0.95])


def topic_rows(rng, topic, posts, per_post):
    tone_sd, cx_mean, cx_sd, rel_sd = TOPICS[topic]
    rows = []
    for p in range(posts):
        post_tone = rng.normal(0.0, 0.5, size=5)
        post_cx = rng.normal(cx_mean, 0.5)
        post_rel = rng.normal(0.0, 0.3)
        for c in range(per_post):
            tone = post_tone + rng.normal(0.0, tone_sd, size=5)
            cx = post_cx + rng.normal(0.0, cx_sd)
            read = LOADINGS * cx + rng.normal(0.0, 0.15, size=5)
            rel = post_rel + rng.normal(0.0, rel_sd)
            rows.append([f"{topic}-{p:03d}-{c}", f"{topic}-{p:03d}", topic,
                         *np.round(np.concatenate([tone, read, [rel]]), 6)])
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent
                                         / "data" / "corpus_fixture.csv"))
    ap.add_argument("--seed", type=int, default=20260101)
    ap.add_argument("--posts", type=int, default=80)
    ap.add_argument("--per-post", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    rows = []
    for topic in TOPICS:
        rows.extend(topic_rows(rng, topic, args.posts, args.per_post))
    with open(args.out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["id", "group", "domain", *FEATURES])
        w.writerows(rows)


if __name__ == "__main__":
    main()
