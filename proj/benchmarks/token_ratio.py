#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Compare the built-in tokenizer's counts with o200k_base on chunk texts.

usage: token_ratio.py SVCDISC_BINARY O200K_BASE_FILE CHUNKS.jsonl...

Chunk files come from `svcdisc index --chunks`.
"""
import json
import subprocess
import sys
import tempfile
from pathlib import Path

import tiktoken
from tiktoken.load import load_tiktoken_bpe

O200K_PATTERN = "|".join([
    r"""[^\r\n\p{L}\p{N}]?[\p{Lu}\p{Lt}\p{Lm}\p{Lo}\p{M}]*[\p{Ll}\p{Lm}\p{Lo}\p{M}]+(?i:'s|'t|'re|'ve|'m|'ll|'d)?""",
    r"""[^\r\n\p{L}\p{N}]?[\p{Lu}\p{Lt}\p{Lm}\p{Lo}\p{M}]+[\p{Ll}\p{Lm}\p{Lo}\p{M}]*(?i:'s|'t|'re|'ve|'m|'ll|'d)?""",
    r"""\p{N}{1,3}""",
    r""" ?[^\s\p{L}\p{N}]+[\r\n/]*""",
    r"""\s*[\r\n]+""",
    r"""\s+(?!\S)""",
    r"""\s+""",
])


def main() -> int:
    if len(sys.argv) < 4:
        print(__doc__, file=sys.stderr)
        return 2
    binary, ranks_file, chunk_files = sys.argv[1], sys.argv[2], sys.argv[3:]
    enc = tiktoken.Encoding(
        "o200k_base",
        pat_str=O200K_PATTERN,
        mergeable_ranks=load_tiktoken_bpe(ranks_file),
        special_tokens={},
    )
    texts = []
    for f in chunk_files:
        with open(f, encoding="utf-8") as fh:
            texts += [json.loads(line)["content"] for line in fh if line.strip()]

    with tempfile.TemporaryDirectory() as tmp:
        paths = []
        for i, t in enumerate(texts):
            p = Path(tmp) / f"{i}.txt"
            p.write_bytes(t.encode("utf-8"))
            paths.append(str(p))
        ours = []
        for start in range(0, len(paths), 500):
            out = subprocess.run([binary, "tokens", *paths[start:start + 500]], check=True,
                                 capture_output=True, text=True).stdout
            ours += [int(line.split("\t")[0]) for line in out.splitlines()]

    theirs = [len(enc.encode_ordinary(t)) for t in texts]
    ratios = sorted(a / b for a, b in zip(ours, theirs) if b > 0)
    print(f"texts {len(texts)}")
    print(f"tokens built-in {sum(ours)} o200k_base {sum(theirs)} ratio {sum(ours) / sum(theirs):.3f}")
    print(f"per-text ratio min {ratios[0]:.3f} median {ratios[len(ratios) // 2]:.3f} max {ratios[-1]:.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
