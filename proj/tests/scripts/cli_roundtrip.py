#!/usr/bin/env python3
# Copyright (c) 2026 The SFA Lab Authors
# SPDX-License-Identifier: Apache-2.0
"""End-to-end checks of the sfa command line.

usage: cli_roundtrip.py <sfa binary> <work dir>
"""

import csv
import filecmp
import random
import shutil
import struct
import subprocess
import sys
from pathlib import Path

CONFIG = """\
data.source = synthetic
synthetic.seed = 4
synthetic.num_tasks = 2
synthetic.classes_per_task = 2
synthetic.dim = 8
synthetic.n_per_class = 60
synthetic.separation = 6
model.hidden = 12
strategy = sfa
sfa.p = 0.25
sfa.beta = 0.5
sgd.learning_rate = 0.1
sgd.batch_size = 16
sgd.steps_per_task = 80
eval.every = 20
run.seeds = 0, 1
"""

failures = []


def check(cond, what):
    print(("ok   " if cond else "FAIL ") + what)
    if not cond:
        failures.append(what)


def run(sfa, *args, expect_ok=True):
    proc = subprocess.run([sfa, *map(str, args)], capture_output=True, text=True)
    if expect_ok and proc.returncode != 0:
        raise SystemExit(f"command failed ({proc.returncode}): {' '.join(map(str, args))}\n{proc.stderr}")
    return proc


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def write_idx(images_path, labels_path, rows, cols, labels, rng):
    with open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(labels), rows, cols))
        f.write(bytes(rng.randrange(256) for _ in range(len(labels) * rows * cols)))
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def recompute_summary(history_rows, summary_row):
    """Final average and forgetting from history.csv, compared with summary.csv."""
    last = {}
    at_boundary = {}
    for r in history_rows:
        train, task, acc = int(r["train_task"]), int(r["eval_task"]), float(r["accuracy"])
        last[task] = acc
        if train == task:
            at_boundary[task] = acc
    tasks = sorted(last)
    ok = abs(sum(last.values()) / len(last) - float(summary_row["final_avg_accuracy"])) <= 1e-6
    for k in tasks:
        ok &= abs(last[k] - float(summary_row[f"final_acc_task{k}"])) <= 1e-6
        expected_forgetting = 0.0 if k == tasks[-1] else at_boundary[k] - last[k]
        ok &= abs(expected_forgetting - float(summary_row[f"forgetting_task{k}"])) <= 1e-6
    return ok


def main():
    sfa, work = sys.argv[1], Path(sys.argv[2])
    shutil.rmtree(work, ignore_errors=True)
    work.mkdir(parents=True)
    cfg = work / "exp.cfg"
    cfg.write_text(CONFIG)

    # train twice: identical CSVs
    run(sfa, "train", "--config", cfg, "--out", work / "a")
    run(sfa, "train", "--config", cfg, "--out", work / "b", "--jobs", "2")
    csvs = sorted(p.relative_to(work / "a") for p in (work / "a").rglob("*.csv"))
    check(len(csvs) >= 5, f"train wrote {len(csvs)} CSV files")
    check(all(filecmp.cmp(work / "a" / p, work / "b" / p, shallow=False) for p in csvs),
          "repeated train runs give byte-identical CSVs")

    # summary.csv agrees with history.csv
    summary = read_csv(work / "a" / "summary.csv")
    check(len(summary) == 2, "one summary row per seed")
    for row in summary:
        history = read_csv(work / "a" / row["run_id"] / "history.csv")
        check(recompute_summary(history, row), f"summary of {row['run_id']} recomputed from history within 1e-6")
    check((work / "a" / "sfa-seed0" / "history_global.csv").exists(), "secondary metric history written")

    # unknown keys are rejected and named
    bad = work / "bad.cfg"
    bad.write_text(CONFIG + "beta_final = 0.5\n")
    proc = run(sfa, "train", "--config", bad, "--out", work / "bad", expect_ok=False)
    check(proc.returncode != 0 and "beta_final" in proc.stderr, "unknown key fails and is named")

    # sweep writes one directory per value plus sweep.csv
    run(sfa, "sweep", "--config", cfg, "--axis", "beta", "--values", "0,1", "--seed", "0", "--out", work / "sweep")
    sweep = read_csv(work / "sweep" / "sweep.csv")
    check([(r["axis"], r["value"]) for r in sweep] == [("beta", "0"), ("beta", "1")], "sweep.csv lists each axis value")
    check(sweep[1]["l2_to_anchor"] == "0", "beta = 1 keeps the previous-task model")

    # merging a checkpoint with itself
    t1 = work / "a" / "sfa-seed0" / "task1.sfac"
    merged = work / "merged.sfac"
    run(sfa, "merge", "--mode", "average", "--inputs", f"{t1},{t1}", "--out", merged)
    check(merged.exists(), "merge writes a checkpoint")

    # eval and fisher on an IDX fixture with the model's input size
    rng = random.Random(7)
    labels = [rng.randrange(4) for _ in range(50)]
    images, label_file = work / "fixture-images", work / "fixture-labels"
    write_idx(images, label_file, 2, 4, labels, rng)
    out = {}
    for ckpt in (t1, merged):
        proc = run(sfa, "eval", "--checkpoint", ckpt, "--images", images, "--labels", label_file)
        out[ckpt] = dict(line.split() for line in proc.stdout.splitlines())
    check(out[t1] == out[merged], "merged self-average evaluates like its input")
    check(out[t1]["examples"] == "50" and 0.0 <= float(out[t1]["accuracy"]) <= 1.0, "eval reports accuracy")
    masked = run(sfa, "eval", "--checkpoint", t1, "--images", images, "--labels", label_file, "--classes", "0,1")
    check(masked.stdout.splitlines()[0] == f"examples {labels.count(0) + labels.count(1)}", "eval restricts to classes")

    with_fisher = work / "fisher.sfac"
    run(sfa, "fisher", "--checkpoint", t1, "--images", images, "--labels", label_file, "--out", with_fisher)
    check(with_fisher.stat().st_size > t1.stat().st_size, "fisher appends a Fisher block")
    fisher_merged = work / "fisher_merged.sfac"
    run(sfa, "merge", "--mode", "fisher", "--inputs", f"{with_fisher},{with_fisher}", "--out", fisher_merged)
    check(fisher_merged.exists(), "fisher merge of checkpoints carrying Fisher blocks")

    corrupt = work / "corrupt.sfac"
    data = bytearray(t1.read_bytes())
    data[-12] ^= 0x01
    corrupt.write_bytes(bytes(data))
    proc = run(sfa, "eval", "--checkpoint", corrupt, "--images", images, "--labels", label_file, expect_ok=False)
    check(proc.returncode != 0 and "digest" in proc.stderr, "corrupted checkpoint is rejected")

    if failures:
        print(f"{len(failures)} check(s) failed")
        return 1
    print("all CLI checks passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
