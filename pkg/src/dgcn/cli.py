"""Command-line pipeline: dataset statistics, graph reconstruction,
feature filtering, training, hyperparameter sweeps, synthetic data.

Exit codes: 0 success, 2 usage or input error, 3 numerical failure.
"""

import argparse
import csv
import json
import statistics
import sys
from multiprocessing import Pool
from pathlib import Path

import numpy as np

from .data import DataFormatError, NodeDataset, SynthConfig, load_dataset, save_matrix, load_matrix, synth_dataset, write_dataset
from .filters import FilterConfig, K_GRID, MU_GRID, laplacian_of_reconstructed, low_pass, mixed_filter
from .graphs import homophily_ratio, normalize_adjacency
from .model import TrainConfig, train
from .reconstruct import SolverError, reconstruct_graphs

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3

SWEEP_FIELDS = ("k", "mu", "beta", "seed", "acc", "nmi", "status")


class UsageError(ValueError):
    pass


def _parse_synth_spec(spec: str) -> SynthConfig:
    defaults = {"d": 16, "deg": 10.0, "noise": 0.2, "seed": 0}
    fields = {}
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise UsageError(f"bad synth spec fragment {part!r}; expected key=value")
        key, value = part.split("=", 1)
        fields[key.strip()] = value.strip()
    try:
        return SynthConfig(
            n=int(fields["n"]),
            c=int(fields["c"]),
            d=int(fields.get("d", defaults["d"])),
            homophily=float(fields["h"]),
            mean_degree=float(fields.get("deg", defaults["deg"])),
            feature_noise=float(fields.get("noise", defaults["noise"])),
            seed=int(fields.get("seed", defaults["seed"])),
        )
    except KeyError as exc:
        raise UsageError(f"synth spec missing required key {exc.args[0]!r} (need n, c, h)")
    except ValueError as exc:
        raise UsageError(f"bad synth spec: {exc}")


def _load_any(args) -> NodeDataset:
    if getattr(args, "manifest", None):
        return load_dataset(args.manifest)
    if getattr(args, "synth", None):
        return synth_dataset(_parse_synth_spec(args.synth))
    raise UsageError("provide --manifest or --synth")


def _ensure_out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_run_manifest(out: Path, command: str, args):
    echo = {k: v for k, v in vars(args).items() if k != "func"}
    payload = {"command": command, "args": echo}
    (out / "run_manifest.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _parse_float_list(text: str):
    return [float(x) for x in text.split(",") if x.strip() != ""]


def _parse_int_list(text: str):
    return [int(x) for x in text.split(",") if x.strip() != ""]


def _hop_homophily_table(dataset: NodeDataset, hops=range(1, 6)) -> dict:
    table = {}
    for l in hops:
        try:
            table[l] = homophily_ratio(dataset.graph, dataset.labels, l)
        except ValueError:
            table[l] = None
    return table


def cmd_stats(args) -> int:
    dataset = _load_any(args)
    if dataset.labels is None:
        raise UsageError("stats needs ground-truth labels")
    edges = int((dataset.graph.adj > 0).sum() // 2)
    hops = _hop_homophily_table(dataset)
    payload = {
        "name": dataset.name,
        "nodes": dataset.n,
        "dims": dataset.d,
        "edges": edges,
        "clusters": dataset.clusters,
        "homophily": {str(l): hops[l] for l in hops},
    }
    print(f"{'name':<24}{'nodes':>8}{'dims':>8}{'edges':>10}{'clusters':>10}{'h(1)':>9}")
    h1 = hops[1]
    print(
        f"{dataset.name:<24}{dataset.n:>8}{dataset.d:>8}{edges:>10}{dataset.clusters:>10}"
        f"{h1 if h1 is None else format(h1, '.4f'):>9}"
    )
    for l in sorted(hops):
        val = hops[l]
        print(f"  hop {l}: {'n/a' if val is None else format(val, '.4f')}")
    print(json.dumps(payload, sort_keys=True))
    return EXIT_OK


def _reconstruct_for(dataset: NodeDataset, args):
    norm = normalize_adjacency(dataset.graph)
    recon = reconstruct_graphs(
        dataset.features, norm, m=args.m, max_iters=args.recon_iters, tol=args.recon_tol
    )
    return norm, recon


def cmd_reconstruct(args) -> int:
    dataset = _load_any(args)
    out = _ensure_out(args)
    _write_run_manifest(out, "reconstruct", args)
    _, recon = _reconstruct_for(dataset, args)
    save_matrix(out / "S.mat", recon.homophilic.s)
    save_matrix(out / "H.mat", recon.heterophilic.h)
    print(f"wrote {out / 'S.mat'} ({recon.homophilic.iterations_run} iterations, "
          f"residual {recon.homophilic.residual:.3e})")
    print(f"wrote {out / 'H.mat'} (budget {recon.heterophilic.m})")
    if dataset.labels is None:
        print("no labels: skipping homophily audit")
        return EXIT_OK
    audit = {
        "h_raw": homophily_ratio(dataset.graph, dataset.labels, 1),
        "h_homophilic": homophily_ratio(recon.homophilic.s, dataset.labels, 1),
        "h_heterophilic": homophily_ratio(recon.heterophilic.h, dataset.labels, 1),
    }
    print(f"h(A) = {audit['h_raw']:.4f}  h(S) = {audit['h_homophilic']:.4f}  "
          f"h(H) = {audit['h_heterophilic']:.4f}")
    print(json.dumps(audit, sort_keys=True))
    return EXIT_OK


def cmd_filter(args) -> int:
    dataset = _load_any(args)
    out = _ensure_out(args)
    _write_run_manifest(out, "filter", args)
    s_path, h_path = out / "S.mat", out / "H.mat"
    if s_path.exists() and h_path.exists():
        S = load_matrix(s_path)
        H = load_matrix(h_path)
    else:
        _, recon = _reconstruct_for(dataset, args)
        S, H = recon.homophilic.s, recon.heterophilic.h
        save_matrix(s_path, S)
        save_matrix(h_path, H)
    cfg = FilterConfig(args.k, args.mu)
    L_S = laplacian_of_reconstructed(S).laplacian
    if np.any(H > 0):
        L_H = laplacian_of_reconstructed(H).laplacian
        F = mixed_filter(dataset.features, L_S, L_H, cfg).f
    else:
        print("degenerate heterophilic graph: low-pass branch only", file=sys.stderr)
        F = low_pass(dataset.features, L_S, cfg.k)
    save_matrix(out / "F.mat", F)
    print(f"wrote {out / 'F.mat'} (k={cfg.k}, mu={cfg.mu})")
    return EXIT_OK


def _train_config(args, seed: int) -> TrainConfig:
    return TrainConfig(
        k=args.k,
        mu=args.mu,
        beta=args.beta,
        epochs=args.epochs,
        lr=args.lr,
        seed=seed,
        hetero_budget=args.m,
        homo_max_iters=args.recon_iters,
        homo_tol=args.recon_tol,
    )


def _aggregate(values):
    values = sorted(values)
    med = statistics.median(values)
    if len(values) >= 4:
        q = statistics.quantiles(values, n=4)
        iqr = q[2] - q[0]
    else:
        iqr = max(values) - min(values)
    return med, iqr


def cmd_train(args) -> int:
    dataset = _load_any(args)
    out = _ensure_out(args)
    _write_run_manifest(out, "train", args)
    seeds = _parse_int_list(args.seeds)
    if not seeds:
        raise UsageError("need at least one seed")

    norm = normalize_adjacency(dataset.graph)
    recon = reconstruct_graphs(
        dataset.features, norm, m=args.m, max_iters=args.recon_iters, tol=args.recon_tol
    )
    reports = []
    for seed in seeds:
        report = train(
            dataset,
            _train_config(args, seed),
            reconstructed=recon,
            checkpoint_path=out / f"model_seed{seed}.ckpt",
        )
        path = out / f"report_seed{seed}.json"
        path.write_text(json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n")
        print(f"seed {seed}: acc={report.acc} nmi={report.nmi} -> {path}")
        reports.append(report)

    aggregate = {"seeds": seeds, "n_runs": len(reports)}
    if all(r.acc is not None for r in reports):
        acc_med, acc_iqr = _aggregate([r.acc for r in reports])
        nmi_med, nmi_iqr = _aggregate([r.nmi for r in reports])
        aggregate.update(
            acc_median=acc_med, acc_iqr=acc_iqr, nmi_median=nmi_med, nmi_iqr=nmi_iqr
        )
    (out / "aggregate.json").write_text(json.dumps(aggregate, indent=2, sort_keys=True) + "\n")
    print(json.dumps(aggregate, sort_keys=True))
    return EXIT_OK


def _sweep_cell(payload):
    dataset, recon, k, mu, beta, seed, epochs, lr = payload
    try:
        cfg = TrainConfig(k=k, mu=mu, beta=beta, epochs=epochs, lr=lr, seed=seed)
        report = train(dataset, cfg, reconstructed=recon)
        acc = "" if report.acc is None else f"{report.acc:.6f}"
        nmi = "" if report.nmi is None else f"{report.nmi:.6f}"
        return {"k": k, "mu": mu, "beta": beta, "seed": seed, "acc": acc, "nmi": nmi, "status": "ok"}
    except Exception as exc:  # record the failure, keep sweeping
        return {
            "k": k, "mu": mu, "beta": beta, "seed": seed, "acc": "", "nmi": "",
            "status": f"error: {exc}",
        }


def _read_done_cells(csv_path: Path):
    done = set()
    if not csv_path.exists():
        return done
    with open(csv_path, newline="") as fh:
        for row in csv.DictReader(fh):
            done.add((row["k"], row["mu"], row["beta"], row["seed"]))
    return done


def cmd_sweep(args) -> int:
    dataset = _load_any(args)
    out = _ensure_out(args)
    _write_run_manifest(out, "sweep", args)
    ks = _parse_int_list(args.k_grid) if args.k_grid else list(K_GRID)
    mus = _parse_float_list(args.mu_grid) if args.mu_grid else list(MU_GRID)
    betas = _parse_float_list(args.beta_grid) if args.beta_grid else [1.0]
    seeds = _parse_int_list(args.seeds)
    if not (ks and mus and betas and seeds):
        raise UsageError("sweep grid is empty")
    for k in ks:
        for mu in mus:
            FilterConfig(k, mu)  # validate the whole grid up front

    csv_path = out / "sweep.csv"
    done = _read_done_cells(csv_path)
    cells = [
        (k, mu, beta, seed)
        for k in ks
        for mu in mus
        for beta in betas
        for seed in seeds
        if (str(k), str(mu), str(beta), str(seed)) not in done
    ]
    print(f"{len(cells)} cells to run ({len(done)} already in {csv_path})")
    if not cells:
        return EXIT_OK

    norm = normalize_adjacency(dataset.graph)
    recon = reconstruct_graphs(
        dataset.features, norm, m=args.m, max_iters=args.recon_iters, tol=args.recon_tol
    )
    payloads = [
        (dataset, recon, k, mu, beta, seed, args.epochs, args.lr) for k, mu, beta, seed in cells
    ]

    new_file = not csv_path.exists()
    with open(csv_path, "a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_FIELDS)
        if new_file:
            writer.writeheader()
        if args.workers > 1:
            with Pool(args.workers) as pool:
                for row in pool.imap(_sweep_cell, payloads):
                    writer.writerow(row)
                    fh.flush()
                    print(f"k={row['k']} mu={row['mu']} beta={row['beta']} seed={row['seed']}: "
                          f"{row['status']} acc={row['acc']}")
        else:
            for payload in payloads:
                row = _sweep_cell(payload)
                writer.writerow(row)
                fh.flush()
                print(f"k={row['k']} mu={row['mu']} beta={row['beta']} seed={row['seed']}: "
                      f"{row['status']} acc={row['acc']}")
    return EXIT_OK


def cmd_synth(args) -> int:
    if not args.synth:
        raise UsageError("synth needs --synth \"n=..,c=..,h=..\"")
    dataset = synth_dataset(_parse_synth_spec(args.synth))
    out = _ensure_out(args)
    _write_run_manifest(out, "synth", args)
    manifest_path = write_dataset(dataset, out)
    realized = homophily_ratio(dataset.graph, dataset.labels, 1)
    print(f"wrote {manifest_path} (realized 1-hop homophily {realized:.4f})")
    return EXIT_OK


def _add_dataset_flags(p):
    p.add_argument("--manifest", help="path to a dataset manifest JSON")
    p.add_argument("--synth", help="inline synthetic spec: n=..,c=..,h=..[,d=..,deg=..,noise=..,seed=..]")


def _add_recon_flags(p):
    p.add_argument("--m", type=int, default=5, help="heterophilic per-row edge budget")
    p.add_argument("--recon-iters", type=int, default=10, help="homophilic outer iterations")
    p.add_argument("--recon-tol", type=float, default=1e-4, help="homophilic row-change tolerance")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dgcn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="dataset shape and per-hop homophily")
    _add_dataset_flags(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("reconstruct", help="build and save the homophilic/heterophilic graphs")
    _add_dataset_flags(p)
    _add_recon_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("filter", help="apply the mixed filter and save the features")
    _add_dataset_flags(p)
    _add_recon_flags(p)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--mu", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("train", help="train the clustering network")
    _add_dataset_flags(p)
    _add_recon_flags(p)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--mu", type=float, default=0.5)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--seeds", default="0")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="grid search over k, mu, beta, seeds (resumable)")
    _add_dataset_flags(p)
    _add_recon_flags(p)
    p.add_argument("--k", dest="k_grid", default="", help="comma list; default 1,2,3,4,5,10")
    p.add_argument("--mu", dest="mu_grid", default="", help="comma list; default 0.0..1.0 step 0.1")
    p.add_argument("--beta", dest="beta_grid", default="", help="comma list; default 1")
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--seeds", default="0")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="generate a synthetic dataset on disk")
    p.add_argument("--synth", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, DataFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
