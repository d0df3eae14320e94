#!/usr/bin/env python3
"""Reference pipeline for the end-to-end golden report.

Written independently of the Rust code from the format descriptions:
parse a generation, align labels to the vocabulary by cosine, score SGCLS*
Recall/Precision@K with per-predicate and per-role breakdowns, and print the
report JSON.

    python3 scripts/golden_oracle.py crates/core/tests/fixtures/e2e > report.golden.json
"""

import json
import math
import re
import sys
from collections import Counter
from pathlib import Path

KS = [1, 10, 20, 50, 100]
LINE = re.compile(r"^(?:\d+\s*[.):]\s*|\d+\s+)?\(([^(),]*),([^(),]*),([^(),]*)\)$")


def norm_label(s):
    s = " ".join(s.replace("_", " ").lower().split())
    while s and (s[-1].isspace() or (s[-1].isascii() and not s[-1].isalnum() and s[-1].isprintable())):
        s = s[:-1]
    return s


def bounded(text, i, n):
    word = lambda c: c.isalnum() or c == "_"
    return not (i > 0 and word(text[i - 1])) and not (i + n < len(text) and word(text[i + n]))


def find_tokens(text, tok):
    out, start = [], 0
    while True:
        i = text.find(tok, start)
        if i < 0:
            return out
        if bounded(text, i, len(tok)):
            out.append(i)
        start = i + 1


def parse(text, frame_ids):
    ends = find_tokens(text, "#sgend")
    body = text[: ends[0]] if ends else text
    segments, start = [], 0
    for i in find_tokens(body, "#frameid"):
        segments.append(body[start:i])
        start = i + len("#frameid")
    segments.append(body[start:])
    frames = {f: [] for f in frame_ids}
    for fid, seg in zip(frame_ids, segments):
        seen = set()
        for line in seg.splitlines():
            m = LINE.match(line.strip())
            if not m:
                continue
            t = tuple(norm_label(g) for g in m.groups())
            if not all(t) or t in seen:
                continue
            seen.add(t)
            frames[fid].append(t)
    return frames


def cos(u, v):
    return sum(a * b for a, b in zip(u, v)) / (math.sqrt(sum(a * a for a in u)) * math.sqrt(sum(b * b for b in v)))


def align(label, targets, table):
    if label in targets:
        return label
    if label not in table:
        return None
    scored = [(-cos(table[label], table[t]), t) for t in sorted(targets)]
    return min(scored)[1]


def greedy(pred, gt):
    used, hit_rank, pred_hit = set(), [None] * len(gt), [False] * len(pred)
    for r, p in enumerate(pred):
        for j, g in enumerate(gt):
            if j not in used and g == p:
                used.add(j)
                hit_rank[j] = r + 1
                pred_hit[r] = True
                break
    return pred_hit, hit_rank


def mean(xs):
    xs = list(xs)
    return sum(xs) / len(xs) if xs else None


def main(root):
    root = Path(root)
    vocab = json.loads((root / "vocab.json").read_text())
    objects = {norm_label(o) for o in vocab["objects"]}
    predicates = {norm_label(p) for p in vocab["predicates"]}
    table = {}
    for line in (root / "t5.jsonl").read_text().splitlines():
        rec = json.loads(line)
        if "key" in rec:
            table[rec["key"]] = rec["vector"]

    frame_ids = [l.strip() for l in (root / "frames.txt").read_text().splitlines() if l.strip()]
    parsed = parse((root / "generation.txt").read_text(), frame_ids)
    pred = {}
    for fid, ts in parsed.items():
        out = []
        for s, p, o in ts:
            a = (align(s, objects, table), align(p, predicates, table), align(o, objects, table))
            if all(a):
                out.append(a)
        pred[fid] = out

    gt_doc = json.loads((root / "gt.json").read_text())["videos"][0]
    gt = {
        f["frame_id"]: [(norm_label(t["subject"]), norm_label(t["predicate"]), norm_label(t["object"])) for t in f["triplets"]]
        for f in gt_doc["frames"]
    }
    order = [f["frame_id"] for f in gt_doc["frames"]]
    outcomes = [(fid, greedy(pred[fid], gt[fid])) for fid in order]

    recall, precision, mean_recall, mean_precision, per_class = {}, {}, {}, {}, {}
    for k in KS:
        rs, ps = [], []
        gt_n, gt_hit, pr_n, pr_hit = Counter(), Counter(), Counter(), Counter()
        for fid, (pred_hit, hit_rank) in outcomes:
            returned = min(k, len(pred[fid]))
            hits = sum(pred_hit[:returned])
            if gt[fid]:
                rs.append(hits / len(gt[fid]))
            if returned:
                ps.append(hits / returned)
            for g, r in zip(gt[fid], hit_rank):
                gt_n[g[1]] += 1
                gt_hit[g[1]] += r is not None and r <= k
            for p, h in zip(pred[fid][:returned], pred_hit[:returned]):
                pr_n[p[1]] += 1
                pr_hit[p[1]] += h
        # one video, so the video mean is the frame mean
        recall[str(k)] = mean(rs) or 0.0
        precision[str(k)] = mean(ps) or 0.0
        cr, cp = [], []
        for c in sorted(set(gt_n) | set(pr_n)):
            entry = per_class.setdefault(c, {"recall": {}, "precision": {}})
            if gt_n[c]:
                entry["recall"][str(k)] = gt_hit[c] / gt_n[c]
                cr.append(entry["recall"][str(k)])
            if pr_n[c]:
                entry["precision"][str(k)] = pr_hit[c] / pr_n[c]
                cp.append(entry["precision"][str(k)])
        mean_recall[str(k)] = mean(cr) or 0.0
        mean_precision[str(k)] = mean(cp) or 0.0

    entity = {}
    for role, idx in [("subject", 0), ("predicate", 1), ("object", 2)]:
        ps, rs = [], []
        for fid in order:
            g = Counter(t[idx] for t in gt[fid])
            p = Counter(t[idx] for t in pred[fid])
            matched = sum((g & p).values())
            if pred[fid]:
                ps.append(matched / len(pred[fid]))
            if gt[fid]:
                rs.append(matched / len(gt[fid]))
        entity[role] = {"precision": mean(ps) or 0.0, "recall": mean(rs) or 0.0}

    report = {
        "task": "sgcls-star",
        "k": KS,
        "recall": recall,
        "precision": precision,
        "mean_recall": mean_recall,
        "mean_precision": mean_precision,
        "ndcg": {},
        "per_class": {c: per_class[c] for c in sorted(per_class)},
        "entity": entity,
    }
    sys.stdout.write(json.dumps(report, indent=2) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "crates/core/tests/fixtures/e2e")
