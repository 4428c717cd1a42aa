#!/usr/bin/env python3
"""Brute-force oracle for the bundled mini-corpus.

Rebuilds the expected chunks straight from the fixture text (known furniture,
heading lines, 180/30 windows), embeds them with an independent FNV-1a
feature-hashing implementation and checks that every gold question retrieves
exactly its article's chunks at k=3 and that the extractive answer is the key
sentence. Writes expected.json for the C++ tests.
"""
import collections
import json
import math
import pathlib
import re
import sys

CORPUS = pathlib.Path(__file__).resolve().parent.parent / "corpus"
DIM = 256
MAX_TOKENS, OVERLAP = 180, 30
DOC_ID = "mini_constitution"

HEADER = "Mini Constitution of Arcadia (test edition)"
PAGE_NO = re.compile(r"^-\s*\d+\s*-$")
ARTICLE = re.compile(r"^(\d{1,3})\.\s+")
PART = re.compile(r"^PART\s+([IVXLCDM]+)\b")
CLAUSE = re.compile(r"^\(([a-z]|\d{1,2})\)")


def fnv1a64(data: bytes) -> int:
    h = 0xcbf29ce484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001b3) & 0xFFFFFFFFFFFFFFFF
    return h


def word_tokens(s: str):
    out, cur = [], []
    for b in s.encode("utf-8"):
        if b >= 0x80 or chr(b).isalnum():
            cur.append(chr(b).lower() if b < 0x80 else chr(b))
        elif cur:
            out.append("".join(cur))
            cur = []
    if cur:
        out.append("".join(cur))
    return out


def embed(tokens):
    v = [0.0] * DIM
    for tok, c in collections.Counter(tokens).items():
        h = fnv1a64(tok.encode("latin-1"))
        sign = -1.0 if h >> 63 else 1.0
        v[h % DIM] += sign * (1.0 + math.log(c))
    n = math.sqrt(sum(x * x for x in v))
    return [x / n for x in v] if n else v


def cosine(a, b):
    return max(-1.0, min(1.0, sum(x * y for x, y in zip(a, b))))


def f1_multiset(a, b):
    if not a or not b:
        return 0.0
    ca, cb = collections.Counter(a), collections.Counter(b)
    overlap = sum(min(ca[t], cb[t]) for t in ca)
    if overlap == 0:
        return 0.0
    p, r = overlap / len(a), overlap / len(b)
    return 2 * p * r / (p + r)


def sentences(text):
    out = []
    for line in text.split("\n"):
        for piece in re.split(r"(?<=[.?!])\s+", line):
            if piece.strip():
                out.append(piece.strip())
    return out


def build_chunks():
    raw = (CORPUS / "mini_constitution.txt").read_text(encoding="utf-8")
    lines = []
    for page in raw.split("\f"):
        for line in page.split("\n"):
            line = line.strip()
            if not line or line == HEADER or PAGE_NO.match(line):
                continue
            lines.append(line)

    # Segment = run of lines between article boundaries. An article runs
    # until the next article or PART heading.
    # A gap segment takes the part in force at its first line.
    segments, cur, cur_article, cur_part = [], [], None, None
    part = None
    for line in lines:
        m_art, m_part = ARTICLE.match(line), PART.match(line)
        if m_art or (m_part and cur_article is not None):
            if cur:
                segments.append((cur_article, cur_part, cur))
            cur, cur_article = [], None
        if m_part:
            part = m_part.group(1)
        if m_art:
            cur_article = (part, m_art.group(1))
        if not cur:
            cur_part = part
        cur.append(line)
    segments.append((cur_article, cur_part, cur))

    chunks = []
    for article, seg_part, seg_lines in segments:
        toks = []  # (token, clause label in force at the token)
        clause = None
        for line in seg_lines:
            m = CLAUSE.match(line)
            if m and article is not None:
                clause = m.group(1)
            for t in line.split():
                toks.append((t, clause))
        start = 0
        while True:
            end = min(start + MAX_TOKENS, len(toks))
            window = toks[start:end]
            if article is None:
                path = f"Part {seg_part}" if seg_part else ""
            else:
                path = f"Part {article[0]} / Article {article[1]}"
                if window[0][1] is not None:
                    path += f" / Clause ({window[0][1]})"
            text = " ".join(t for t, _ in window)
            chunks.append({"chunk_id": "%s:%05d" % (DOC_ID, len(chunks)), "path": path,
                           "token_count": end - start, "text": text})
            if end == len(toks):
                break
            start += MAX_TOKENS - OVERLAP
    return chunks


def main():
    chunks = build_chunks()
    vecs = [embed(word_tokens(c["text"])) for c in chunks]
    gold = [json.loads(l) for l in (CORPUS / "gold.jsonl").read_text().splitlines() if l.strip()]
    ok = True
    report = []
    for item in gold:
        rel_path = item["relevant"][0]
        relevant = [c["chunk_id"] for c in chunks
                    if c["path"] == rel_path or c["path"].startswith(rel_path + " / ")]
        q = embed(word_tokens(item["question"]))
        scored = sorted(((cosine(q, v), c["chunk_id"]) for v, c in zip(vecs, chunks)),
                        key=lambda s: (-s[0], s[1]))
        top3 = [cid for _, cid in scored[:3]]
        margin = scored[2][0] - scored[3][0]
        by_id = {c["chunk_id"]: c for c in chunks}
        best, best_f1 = None, -1.0
        qt = word_tokens(item["question"])
        # Stub: candidates rendered in document order.
        for cid in sorted(top3):
            for s in sentences(by_id[cid]["text"]):
                f = f1_multiset(word_tokens(s), qt)
                if f > best_f1:
                    best, best_f1 = s, f
        ans_f1 = f1_multiset(best.lower().split(), item["gold_answer"].lower().split())
        good = sorted(top3) == sorted(relevant) and len(relevant) == 3 and ans_f1 >= 0.8
        ok &= good
        report.append({"question": item["question"], "top3": top3, "relevant": relevant,
                       "margin": margin, "answer": best, "answer_f1": ans_f1})
        print(f"{'ok ' if good else 'BAD'} margin={margin:.4f} answer_f1={ans_f1:.3f} {item['question']}")

    ids = {c["chunk_id"] for c in chunks}
    for line in (CORPUS / "train.jsonl").read_text().splitlines():
        if json.loads(line)["chunk_id"] not in ids:
            print("BAD training chunk id", line)
            ok = False

    expected = {"chunk_count": len(chunks),
                "chunks": [{k: c[k] for k in ("chunk_id", "path", "token_count")} for c in chunks],
                "questions": report}
    (CORPUS / "expected.json").write_text(json.dumps(expected, indent=1) + "\n", encoding="utf-8")
    print(f"chunks={len(chunks)}")
    sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()
