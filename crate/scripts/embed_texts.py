#!/usr/bin/env python3
"""Embed texts exported by `memroute export-texts`.

Reads {"digest", "text"} JSONL and writes {"digest", "vector"} JSONL for
`memroute import-embeddings`. Requires sentence-transformers.
"""
import argparse
import json

from sentence_transformers import SentenceTransformer


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("texts")
    ap.add_argument("out")
    ap.add_argument("--model", default="BAAI/bge-small-en-v1.5")
    ap.add_argument("--batch-size", type=int, default=64)
    args = ap.parse_args()

    with open(args.texts, encoding="utf-8") as f:
        rows = [json.loads(line) for line in f if line.strip()]
    model = SentenceTransformer(args.model)
    vectors = model.encode(
        [r["text"] for r in rows],
        batch_size=args.batch_size,
        show_progress_bar=True,
        convert_to_numpy=True,
    )
    with open(args.out, "w", encoding="utf-8") as f:
        for r, v in zip(rows, vectors):
            f.write(json.dumps({"digest": r["digest"], "vector": v.tolist()}) + "\n")


if __name__ == "__main__":
    main()
