"""Energy ratio of per-frame detection over detection with tracking.

Uses the segmentation and classification timings as energy proxies
(31 ms per frame, 260 ms per frame of proposals) and tabulates the ratio
against the mean tracklet lifespan N_go.
"""

import argparse

from sctrack.evaluation import EnergyModel, energy_ratio


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seg-ms", type=float, default=31.0)
    ap.add_argument("--class-ms-per-frame", type=float, default=260.0)
    ap.add_argument("--objects", type=float, default=10.0, help="proposals per frame, objects plus background")
    ap.add_argument("--frames", type=int, default=1000)
    args = ap.parse_args()

    per_object = args.class_ms_per_frame / args.objects
    print(f"E_seg {args.seg_ms} ms/frame, E_class {per_object:.1f} ms/proposal, {args.objects:g} proposals/frame")
    print(f"{'N_go':>6} {'ratio':>8} {'ratio/N_go':>11}")
    for n_go in (1, 2, 5, 10, 20, 32.4, 50, 100):
        m = EnergyModel(args.seg_ms, per_object, args.objects, 0.0, n_go, args.frames)
        r = energy_ratio(m)
        print(f"{n_go:6g} {r:8.3f} {r / n_go:11.3f}")
    print(f"upper limit as N_go grows: {(args.seg_ms + args.class_ms_per_frame) / args.seg_ms:.2f}")


if __name__ == "__main__":
    main()
