"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error (bad files, failed
checks), 3 internal error. All randomness flows from the --seed flag so
repeated invocations produce byte-identical outputs.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click
import numpy as np

from . import analysis, evalharness, mining, providers, scoring
from .checks import gradient_check
from .core import DenseEmbedding
from .errors import DocretError
from .hnsw import HnswParams
from .losses import LossConfig
from .merge import MergeConfig, load_checkpoint, merge as merge_checkpoints, save_checkpoint

log = logging.getLogger("docret")


def _doc_text(entry: dict) -> str:
    title = entry.get("title", "") or ""
    text = entry.get("text", "") or ""
    combined = f"{title} {text}".strip()
    return combined or entry.get("image_path", "") or entry["_id"]


def _make_provider(kind: str, seed: int, dim: int, path=None):
    if kind == "synthetic":
        return providers.SyntheticProvider(seed=seed, dim=dim)
    if kind == "precomputed":
        if path is None:
            raise click.UsageError("--embeddings file required for the precomputed provider")
        return providers.PrecomputedProvider(path)
    raise click.UsageError(f"unknown provider {kind!r}")


@click.group()
@click.option("--seed", default=42, show_default=True, type=int)
@click.option("--threads", default=1, show_default=True, type=int)
@click.option("--log-level", default="warning", show_default=True,
              type=click.Choice(["debug", "info", "warning", "error"]))
@click.pass_context
def cli(ctx, seed, threads, log_level):
    """Retrieval workbench: indexing, evaluation, mining, merging, analysis."""
    logging.basicConfig(level=log_level.upper(), stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(message)s")
    ctx.obj = {"seed": seed, "threads": max(1, threads)}


@cli.command()
@click.option("--corpus", "corpus_dir", type=click.Path(), help="BEIR-style dataset directory")
@click.option("--embeddings", "emb_file", type=click.Path(), help="precomputed embedding TSV")
@click.option("--provider", default="synthetic", show_default=True)
@click.option("--dim", default=64, show_default=True, type=int)
@click.option("--ann/--no-ann", default=False, show_default=True)
@click.option("--m", "m_", default=16, show_default=True, type=int)
@click.option("--ef-construction", default=200, show_default=True, type=int)
@click.option("--ef-search", default=100, show_default=True, type=int)
@click.option("--out", required=True, type=click.Path())
@click.pass_context
def index(ctx, corpus_dir, emb_file, provider, dim, ann, m_, ef_construction, ef_search, out):
    """Build and persist a dense index from a corpus or embedding file."""
    seed = ctx.obj["seed"]
    if emb_file:
        records = providers.load_precomputed(emb_file)
        pairs = [(rid, rec.payload) for rid, rec in sorted(records.items())
                 if rec.kind == "dense"]
    elif corpus_dir:
        dataset_dir = Path(corpus_dir)
        corpus_path = dataset_dir / "corpus.jsonl"
        if not corpus_path.exists():
            raise DocretError(f"no corpus.jsonl under {dataset_dir}")
        prov = _make_provider(provider, seed, dim)
        pairs = []
        with corpus_path.open("r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                entry = json.loads(line)
                pairs.append((str(entry["_id"]), prov.embed_text(_doc_text(entry))))
        pairs.sort(key=lambda p: p[0])
    else:
        raise click.UsageError("one of --corpus or --embeddings is required")

    params = HnswParams(M=m_, ef_construction=ef_construction,
                        ef_search=ef_search, seed=seed) if ann else None
    idx = scoring.build_dense_index(pairs, params)
    scoring.save_dense_index(idx, out)
    log.info("indexed %d docs (dim %d) -> %s", idx.n_docs, idx.dim, out)
    click.echo(f"indexed {idx.n_docs} docs (dim {idx.dim})")


@cli.command()
@click.option("--dataset", required=True, type=click.Path())
@click.option("--index", "index_dir", required=True, type=click.Path())
@click.option("--provider", default="synthetic", show_default=True)
@click.option("--embeddings", "emb_file", type=click.Path())
@click.option("--depth", default=100, show_default=True, type=int)
@click.option("--mode", default="exact", show_default=True, type=click.Choice(["exact", "ann"]))
@click.option("--metrics", default=",".join(evalharness.METRICS), show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.pass_context
def eval(ctx, dataset, index_dir, provider, emb_file, depth, mode, metrics, out):
    """Run retrieval over a BEIR-style dataset and report metrics."""
    seed = ctx.obj["seed"]
    ds = evalharness.load_beir(dataset)
    idx = scoring.load_dense_index(index_dir)
    prov = _make_provider(provider, seed, idx.dim, emb_file)
    wanted = [m.strip() for m in metrics.split(",") if m.strip()]
    for name in wanted:
        kind, _, k = name.partition("@")
        if kind not in ("ndcg", "recall", "map", "mrr") or not k.isdigit():
            raise click.UsageError(f"unknown metric {name!r}")
        if depth < int(k):
            click.echo(f"warning: depth {depth} < cutoff of {name}; computed on available depth",
                       err=True)
    run = evalharness.run_retrieval(ds, prov, idx, depth=depth, mode=mode)
    report = evalharness.compute_metrics(run, ds.qrels, wanted)
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    evalharness.save_run(outdir / "run.tsv", run)
    evalharness.save_report(outdir / "report.txt", report)
    for name in wanted:
        click.echo(f"{name}\t{report.means[name]:.6f}")


@cli.command()
@click.option("--dataset", required=True, type=click.Path())
@click.option("--sidecars", type=click.Path(), help="JSONL OCR text sidecars; defaults to corpus text")
@click.option("--ranking", "ranking_files", multiple=True, type=click.Path(),
              help="external ranking TSVs to fuse in")
@click.option("--dim", default=64, show_default=True, type=int)
@click.option("--rrf-k", default=60.0, show_default=True, type=float)
@click.option("--pool", default=20, show_default=True, type=int)
@click.option("--k", "k_neg", default=3, show_default=True, type=int)
@click.option("--out", required=True, type=click.Path())
@click.pass_context
def mine(ctx, dataset, sidecars, ranking_files, dim, rrf_k, pool, k_neg, out):
    """Mine hard negatives with BM25 + embedding rankers fused by RRF."""
    seed = ctx.obj["seed"]
    ds = evalharness.load_beir(dataset)
    cfg = mining.MiningConfig(K=k_neg, pool_size=pool, rrf_k=rrf_k, seed=seed)
    if sidecars:
        cars = mining.load_sidecars(sidecars)
    else:
        cars = [mining.TextSidecar(doc=did, text=_doc_text(entry))
                for did, entry in sorted(ds.corpus.items())]
    prov = providers.SyntheticProvider(seed=seed, dim=dim)
    idx = scoring.build_dense_index(
        [(did, prov.embed_text(_doc_text(entry))) for did, entry in sorted(ds.corpus.items())]
    )
    external = [mining.load_ranking_file(p) for p in ranking_files]

    results = {}
    for qid in sorted(ds.queries):
        positives = ds.qrels.positives(qid)
        if not positives:
            continue
        positive = sorted(positives)[0]
        text = ds.queries[qid]
        rankings = [
            mining.bm25_rank(text, cars, top_n=pool * 2),
            mining.embedding_rank(prov.embed_text(text), idx, top_n=pool * 2),
        ]
        for ext in external:
            if qid in ext:
                rankings.append(ext[qid])
        fused = mining.rrf_fuse(rankings, rrf_k=rrf_k)
        results[qid] = (positive, mining.mine_negatives(qid, positive, fused, cfg))
    mining.save_negatives(out, results)
    click.echo(f"mined negatives for {len(results)} queries")


@cli.command()
@click.option("--method", default="slerp", show_default=True, type=click.Choice(["linear", "slerp"]))
@click.option("--alpha", default=0.5, show_default=True, type=float)
@click.option("--magnitude", default="interpolate", show_default=True,
              type=click.Choice(["interpolate", "keep-a"]))
@click.argument("checkpoint_a", type=click.Path())
@click.argument("checkpoint_b", type=click.Path())
@click.option("--out", "-o", required=True, type=click.Path())
def merge(method, alpha, magnitude, checkpoint_a, checkpoint_b, out):
    """Merge two checkpoint containers."""
    a = load_checkpoint(checkpoint_a)
    b = load_checkpoint(checkpoint_b)
    cfg = MergeConfig(method=method, alpha=alpha, magnitude=magnitude)
    save_checkpoint(out, merge_checkpoints(a, b, cfg))
    click.echo(f"merged {len(a.tensors)} tensors ({method}, alpha={alpha}) -> {out}")


@cli.group()
def analyze():
    """Plot-data exports: PCA projections, heatmaps, storage accounting."""


@analyze.command("pca")
@click.option("--embeddings", "emb_files", multiple=True, required=True, type=click.Path(),
              help="one precomputed embedding file per checkpoint")
@click.option("--labels", "labels_file", type=click.Path(),
              help="TSV `id <TAB> language <TAB> role`")
@click.option("--out", required=True, type=click.Path())
@click.pass_context
def analyze_pca(ctx, emb_files, labels_file, out):
    seed = ctx.obj["seed"]
    label_map = {}
    if labels_file:
        for line in Path(labels_file).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            rid, language, role = line.split("\t")
            label_map[rid] = {"language": language, "role": role}
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    projections = {}
    for emb_file in emb_files:
        name = Path(emb_file).stem
        records = providers.load_precomputed(emb_file)
        ids = sorted(records)
        matrix = np.stack([records[r].payload.values for r in ids])
        labels = [{"id": r, **label_map.get(r, {})} for r in ids]
        proj = analysis.pca_project(matrix, labels, seed=seed)
        projections[name] = proj
        analysis.export_projection_csv(outdir / f"pca_{name}.csv", proj, checkpoint=name)
    analysis.export_variance_json(outdir / "variance.json", projections)
    click.echo(f"projected {len(projections)} checkpoint file(s) -> {out}")


@analyze.command("heatmap")
@click.option("--query", "query_text", required=True)
@click.option("--doc", "doc_text", required=True)
@click.option("--dim", default=64, show_default=True, type=int)
@click.option("--max-tokens", default=16, show_default=True, type=int)
@click.option("--rows", required=True, type=int)
@click.option("--cols", required=True, type=int)
@click.option("--out", required=True, type=click.Path())
@click.pass_context
def analyze_heatmap(ctx, query_text, doc_text, dim, max_tokens, rows, cols, out):
    seed = ctx.obj["seed"]
    prov = providers.SyntheticProvider(seed=seed, dim=dim)
    q = prov.embed_text_multivector(query_text, max_tokens)
    d = prov.embed_text_multivector(doc_text, rows * cols)
    if d.n_tokens != rows * cols:
        raise DocretError(
            f"document produced {d.n_tokens} tokens; grid {rows}x{cols} needs {rows * cols}"
        )
    grids = analysis.maxsim_heatmap(q, d, (rows, cols))
    analysis.export_heatmap_csv(out, grids, total_maxsim=scoring.maxsim(q, d))
    click.echo(f"wrote {len(grids)} token heatmaps -> {out}")


@analyze.command("storage")
@click.option("--index", "index_dir", required=True, type=click.Path())
@click.option("--dims", default="", help="comma-separated truncation dims")
def analyze_storage(index_dir, dims):
    idx = scoring.load_dense_index(index_dir)
    truncate = [int(d) for d in dims.split(",") if d.strip()] or None
    report = analysis.storage_report(idx, truncate_dims=truncate)
    click.echo(json.dumps(report, indent=2, sort_keys=True))


@cli.command("loss-check")
@click.option("--trials", default=20, show_default=True, type=int)
@click.option("--tau", default=0.02, show_default=True, type=float)
@click.option("--tolerance", default=1e-4, show_default=True, type=float)
@click.pass_context
def loss_check(ctx, trials, tau, tolerance):
    """Finite-difference gradient verification of all loss functions."""
    worst = gradient_check(trials=trials, seed=ctx.obj["seed"], tau=tau)
    failed = False
    for name in sorted(worst):
        status = "ok" if worst[name] <= tolerance else "FAIL"
        failed = failed or status == "FAIL"
        click.echo(f"{name}\tmax-rel-err {worst[name]:.3e}\t{status}")
    if failed:
        raise DocretError(f"gradient check exceeded tolerance {tolerance}")


@cli.command()
@click.option("--index", "index_dir", required=True, type=click.Path())
@click.option("--provider", default="synthetic", show_default=True)
@click.option("--dim", type=int, help="defaults to the index dim")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8080, show_default=True, type=int)
@click.pass_context
def serve(ctx, index_dir, provider, dim, host, port):
    """Serve /healthz and /search over a persisted index."""
    import uvicorn

    from .server import create_app

    idx = scoring.load_dense_index(index_dir)
    prov = _make_provider(provider, ctx.obj["seed"], dim or idx.dim)
    app = create_app(idx, prov)
    uvicorn.run(app, host=host, port=port, workers=1)


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        sys.exit(1)
    except (DocretError, FileNotFoundError) as exc:
        click.echo(f"data error: {exc}", err=True)
        sys.exit(2)
    except Exception as exc:  # pragma: no cover - defensive
        click.echo(f"internal error: {exc}", err=True)
        sys.exit(3)
    sys.exit(0)


if __name__ == "__main__":
    main()
