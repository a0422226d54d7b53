#!/usr/bin/env python3
"""Run the desk-scale trend study end to end.

Trains the pilot/CP-free scheme and the pilot+CP neural scheme (~20k
iterations each), evaluates the LMMSE baseline across speeds and both
trained schemes across Es/N0, and checks the two headline trends. With
--parallel the two trainings run as single-threaded subprocesses side by
side, which is the fastest option on a two-core box.

    python scripts/run_trend.py --out-dir trend_out --parallel
"""

import argparse
import json
import os
import subprocess
import sys
import time
from pathlib import Path

from ofdmlink.experiments import TrendConfig, run_trend_experiment


def train_in_subprocess(cfg: TrendConfig, scheme):
    payload = json.dumps({
        "scheme": scheme,
        "iterations": cfg.iterations,
        "batch_frames": cfg.batch_frames,
        "width": cfg.width,
        "pilot_pattern": cfg.pilot_pattern,
        "train_seed": cfg.train_seed,
        "out_dir": cfg.out_dir,
    })
    code = (
        "import json, sys\n"
        "from ofdmlink.experiments import TrendConfig, trend_training_config\n"
        "from ofdmlink.training import train\n"
        "spec = json.loads(sys.argv[1])\n"
        "cfg = TrendConfig(out_dir=spec['out_dir'], iterations=spec['iterations'],\n"
        "                  batch_frames=spec['batch_frames'], width=spec['width'],\n"
        "                  pilot_pattern=spec['pilot_pattern'], train_seed=spec['train_seed'])\n"
        "result = train(trend_training_config(cfg, spec['scheme']), printer=print, log_every=200)\n"
        "print('checkpoint:', result.checkpoint_path)\n"
    )
    env = dict(os.environ)
    env.update({
        "OMP_NUM_THREADS": "1",
        "OPENBLAS_NUM_THREADS": "1",
        "NUMBA_NUM_THREADS": "1",
        "MALLOC_MMAP_THRESHOLD_": "1073741824",
        "MALLOC_TRIM_THRESHOLD_": "1073741824",
    })
    log = Path(cfg.out_dir) / f"train-{scheme}.log"
    log.parent.mkdir(parents=True, exist_ok=True)
    handle = open(log, "w")
    proc = subprocess.Popen([sys.executable, "-c", code, payload],
                            stdout=handle, stderr=subprocess.STDOUT, env=env)
    return proc, handle, log


def main():
    parser = argparse.ArgumentParser(description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--out-dir", default="trend_out")
    parser.add_argument("--iterations", type=int, default=20000)
    parser.add_argument("--batch-frames", type=int, default=32)
    parser.add_argument("--width", type=int, default=32)
    parser.add_argument("--eval-frames", type=int, default=300)
    parser.add_argument("--parallel", action="store_true",
                        help="train both schemes in parallel subprocesses")
    parser.add_argument("--gs-checkpoint", default=None, help="reuse a trained gs checkpoint")
    parser.add_argument("--nrx-checkpoint", default=None, help="reuse a trained nrx-cp checkpoint")
    args = parser.parse_args()

    cfg = TrendConfig(out_dir=args.out_dir, iterations=args.iterations,
                      batch_frames=args.batch_frames, width=args.width,
                      eval_frames=args.eval_frames,
                      gs_checkpoint=args.gs_checkpoint, nrx_checkpoint=args.nrx_checkpoint)

    if args.parallel and not (cfg.gs_checkpoint and cfg.nrx_checkpoint):
        started = time.time()
        procs = []
        for scheme in ("gs", "nrx-cp"):
            if (scheme == "gs" and cfg.gs_checkpoint) or (scheme == "nrx-cp" and cfg.nrx_checkpoint):
                continue
            procs.append((scheme,) + train_in_subprocess(cfg, scheme))
            print(f"[trend] training {scheme} in subprocess, log: {procs[-1][3]}")
        for scheme, proc, handle, log in procs:
            rc = proc.wait()
            handle.close()
            if rc != 0:
                print(f"[trend] training {scheme} FAILED, see {log}", file=sys.stderr)
                return 1
            print(f"[trend] training {scheme} finished after {(time.time() - started) / 3600:.2f}h")
        cfg.gs_checkpoint = cfg.gs_checkpoint or str(Path(cfg.out_dir) / "train-gs" / "gs.ckpt")
        cfg.nrx_checkpoint = cfg.nrx_checkpoint or str(Path(cfg.out_dir) / "train-nrx-cp" / "nrx-cp.ckpt")

    report = run_trend_experiment(cfg, printer=lambda msg: print(f"[trend] {msg}", flush=True))
    print(f"[trend] LMMSE degrades with speed: {report.lmmse_degrades_with_speed}")
    print(f"[trend] matched BER {report.matched_ber}; goodput gain {report.goodput_gain} "
          f"(structural {report.structural_gain:.4f})")
    print(f"[trend] operating Es/N0: gs {report.gs_esn0_db} dB, nrx-cp {report.nrx_esn0_db} dB")
    print(f"[trend] overall: {'PASS' if report.passed else 'FAIL'} "
          f"({report.elapsed_s / 3600:.2f}h)")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
