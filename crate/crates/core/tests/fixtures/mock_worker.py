#!/usr/bin/env python3
"""Scriptable detector worker for protocol tests.

usage: mock_worker.py MODE [MARKER]

Modes:
  ok          car = frames in batch, bus = position in batch
  crash-once  exit on the first detect unless MARKER exists (creates it)
  hang        never answer a detect
  garbage     answer with a non-JSON line
  wrong-id    echo batch_id + 1
  short       return one result fewer than frames
  error       answer every detect with an error message
  small       advertise max_batch 2
  no-hello    send a result instead of hello
"""
import json
import os
import sys
import time

mode = sys.argv[1] if len(sys.argv) > 1 else "ok"
marker = sys.argv[2] if len(sys.argv) > 2 else None


def send(msg):
    sys.stdout.write(json.dumps(msg) + "\n")
    sys.stdout.flush()


if mode == "no-hello":
    send({"type": "result", "batch_id": 0, "results": []})
else:
    send({"type": "hello", "max_batch": 2 if mode == "small" else 64, "model_id": "mock-v1"})

for line in sys.stdin:
    if not line.strip():
        continue
    req = json.loads(line)
    batch_id = req["batch_id"]
    frames = req["frames"]
    if mode == "crash-once" and marker and not os.path.exists(marker):
        open(marker, "w").close()
        sys.exit(3)
    if mode == "hang":
        time.sleep(3600)
    if mode == "garbage":
        sys.stdout.write("this is not json\n")
        sys.stdout.flush()
        continue
    if mode == "error":
        send({"type": "error", "batch_id": batch_id, "message": "model exploded"})
        continue
    results = [
        {
            "source": f["source"],
            "captured_at": f["captured_at"],
            "counts": {"car": len(frames), "bus": i},
        }
        for i, f in enumerate(frames)
    ]
    if mode == "short":
        results = results[:-1]
    send({"type": "result", "batch_id": batch_id + (1 if mode == "wrong-id" else 0), "results": results})
