#!/usr/bin/env python3
"""Build a precomputed embedding store for the flowdisco pipeline.

Reads every utterance of one or more corpora (MultiWOZ-style JSON or the
normalized JSONL format), encodes the unique texts with a sentence-transformers
model, and writes the store format the `precomputed` provider consumes:

    {"dim": D, "count": N}
    {"key": "<sha256 of utf-8 text>", "vector": [...]}
    ...

Example:
    python scripts/export_embeddings.py \
        --corpus data/multiwoz/train --corpus data/multiwoz/test \
        --model all-MiniLM-L6-v2 --out store.jsonl
"""

import argparse
import hashlib
import json
import pathlib
import sys


def iter_corpus_texts(path: pathlib.Path):
    if path.is_dir():
        for shard in sorted(path.glob("*.json")):
            yield from iter_corpus_texts(shard)
        return
    if path.suffix == ".jsonl":
        with open(path, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if line:
                    yield json.loads(line)["text"].strip()
        return
    with open(path, encoding="utf-8") as f:
        for dialogue in json.load(f):
            for turn in dialogue["turns"]:
                yield turn.get("utterance", turn.get("text", "")).strip()


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--corpus", action="append", required=True,
                        help="corpus file or directory; repeatable")
    parser.add_argument("--model", default="all-MiniLM-L6-v2")
    parser.add_argument("--out", required=True)
    parser.add_argument("--batch-size", type=int, default=256)
    args = parser.parse_args()

    texts = []
    seen = set()
    for corpus in args.corpus:
        for text in iter_corpus_texts(pathlib.Path(corpus)):
            if text and text not in seen:
                seen.add(text)
                texts.append(text)
    print(f"encoding {len(texts)} unique utterances with {args.model}", file=sys.stderr)

    from sentence_transformers import SentenceTransformer

    model = SentenceTransformer(args.model)
    vectors = model.encode(texts, batch_size=args.batch_size, show_progress_bar=True)

    with open(args.out, "w", encoding="utf-8") as out:
        out.write(json.dumps({"dim": int(vectors.shape[1]), "count": len(texts)}) + "\n")
        for text, vector in zip(texts, vectors):
            key = hashlib.sha256(text.encode("utf-8")).hexdigest()
            out.write(json.dumps({"key": key, "vector": [float(x) for x in vector]}) + "\n")
    print(f"wrote {args.out}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
