#!/usr/bin/env python3
"""Small end-to-end demo that runs in a couple of minutes.

Fits an LMMSE covariance on a reduced frame, evaluates the LMMSE and
perfect-CSI baselines at two speeds, and writes result tables that plotkit
can render:

    python scripts/desk_demo.py --out-dir demo_out
    plotkit demo_out/lmmse.csv demo_out/perfect-csi.csv --metric ber \
        --output demo_out/ber.png
"""

import argparse
from pathlib import Path

from ofdmlink.channel import ChannelRealization, MobilityProfile, generate_batch
from ofdmlink.fec import LdpcCode, peg_construct
from ofdmlink.harness import Evaluator, evaluate, write_results
from ofdmlink.lmmse import fit_covariance
from ofdmlink.metrics import scheme_preset


def main():
    parser = argparse.ArgumentParser(description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--out-dir", default="demo_out")
    parser.add_argument("--subcarriers", type=int, default=24)
    parser.add_argument("--frames", type=int, default=120)
    parser.add_argument("--fit-frames", type=int, default=500)
    parser.add_argument("--seed", type=int, default=5)
    args = parser.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    # a short code so the reduced grid still carries three codewords per frame
    code = LdpcCode(peg_construct(384, 128, var_degree=3, seed=11))
    print(f"code: n={code.n} k={code.k} rate={code.rate:.3f}")

    grid_kw = dict(n_subcarriers=args.subcarriers, n_symbols=14)
    lmmse_scheme = scheme_preset("lmmse", pattern_id="2P", code_rate=code.rate, **grid_kw)
    genie_scheme = scheme_preset("perfect-csi", pattern_id="2P", code_rate=code.rate, **grid_kw)

    print(f"fitting covariance over {args.fit_frames} frames")
    profile = MobilityProfile(n_subcarriers=args.subcarriers)
    taps, _ = generate_batch(profile, lmmse_scheme.grid.n_samples, args.fit_frames, args.seed)
    model = fit_covariance(
        (ChannelRealization(taps=taps[i]) for i in range(args.fit_frames)),
        lmmse_scheme.grid)

    grid_db = [4.0, 6.0, 8.0, 10.0, 12.0]
    speeds = [3.6, 108.0]
    for scheme, kwargs, name in (
        (lmmse_scheme, {"covariance": model}, "lmmse"),
        (genie_scheme, {}, "perfect-csi"),
    ):
        rows = evaluate(Evaluator(scheme=scheme, code=code, **kwargs),
                        speeds, args.frames, args.seed, ebn0_grid_db=grid_db,
                        progress=print)
        path = out / f"{name}.csv"
        write_results(path, rows, {"demo": name, "seed": args.seed})
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
