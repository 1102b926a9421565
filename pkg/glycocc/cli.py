"""
Command-line entry point: parse, assemble, build-cc, train, eval, embed, anp-report, templates, stats.

All relative paths are resolved against --workdir.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence, Tuple

from glycocc import __version__
from glycocc.config import APP_NAME, configure_logging, settings
from glycocc.errors import ConfigError, GlycoccError
from glycocc.models.dataset import Dataset, Partition, SplitAssignment
from glycocc.models.run_config import RunConfig, load_run_config, write_resolved_config
from glycocc.services import reports, trainer
from glycocc.services.anp import build_tensor
from glycocc.services.assembly import assemble
from glycocc.services.complex_builder import build_cc, dump_complex
from glycocc.services.datasets import assign_ood, dataset_stats, load_dataset, random_split, read_split, write_split
from glycocc.services.glycan_grammar import parse_iupac
from glycocc.services.smiles import write_smiles
from glycocc.services.templates import template_library

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = "model.gcck"
SPLIT_NAME = "split.tsv"


class Context:
    def __init__(self, workdir: Path, config: RunConfig):
        self.workdir = workdir
        self.config = config

    def path(self, value) -> Path:
        value = Path(value)
        return value if value.is_absolute() else self.workdir / value

    @property
    def output_dir(self) -> Path:
        return self.path(self.config.output_dir)


def _load_data(ctx: Context, dataset_arg: Optional[str]) -> Tuple[Dataset, SplitAssignment]:
    """Dataset plus a split: the configured split file, one saved in the output dir, or a fresh random split."""
    data = ctx.config.data
    source = dataset_arg or data.dataset
    if not source:
        raise ConfigError("No dataset given (use --dataset or data.dataset)", "data.dataset")
    dataset = load_dataset(
        ctx.path(source),
        data.task,
        n_classes=data.n_classes,
        protein_embeddings=ctx.path(data.protein_embeddings) if data.protein_embeddings else None,
        zscore_values=data.zscore,
        name=data.name,
    )
    saved = ctx.output_dir / SPLIT_NAME
    if data.split_file:
        split = read_split(ctx.path(data.split_file))
    elif saved.exists():
        split = read_split(saved)
    else:
        split = random_split(dataset, ctx.config.split.fractions, ctx.config.split.seed)
        write_split(split, saved)
    split = assign_ood(dataset, split, ctx.config.split.ood_threshold)
    logger.info("%s: %d records, split %s", dataset.name, len(dataset), split.sizes())
    return dataset, split


def cmd_parse(ctx: Context, args) -> None:
    tree = parse_iupac(args.iupac)
    print(json.dumps(tree.model_dump(mode="json"), indent=2))


def cmd_assemble(ctx: Context, args) -> None:
    graph = assemble(parse_iupac(args.iupac))
    print(write_smiles(graph))
    print(f"atoms={len(graph.atoms)} bonds={len(graph.bonds)} monomers={len(graph.monomer_names)}")


def cmd_build_cc(ctx: Context, args) -> None:
    opts = ctx.config.complex
    cc = build_cc(assemble(parse_iupac(args.iupac)), min_2cell_size=opts.min_2cell_size, exhaustive_limit=opts.exhaustive_limit)
    print(dump_complex(cc))


def cmd_train(ctx: Context, args) -> None:
    write_resolved_config(ctx.config, ctx.output_dir)
    dataset, split = _load_data(ctx, args.dataset)
    result = trainer.train(ctx.config, dataset, split)
    trainer.save_model(result.adapter, ctx.output_dir / CHECKPOINT_NAME)
    reports.write_epoch_log(result.epoch_log, ctx.output_dir / "epoch_log.tsv")
    last = result.epoch_log[-1] if result.epoch_log else {}
    print(" ".join(f"{k}={v:.4f}" if k != "epoch" else f"epoch={int(v)}" for k, v in last.items()))


def cmd_eval(ctx: Context, args) -> None:
    write_resolved_config(ctx.config, ctx.output_dir)
    dataset, split = _load_data(ctx, args.dataset)
    adapter = trainer.load_model(ctx.config, dataset, ctx.path(args.checkpoint or ctx.output_dir / CHECKPOINT_NAME))
    records = trainer.evaluate(adapter, dataset, split, Partition(args.subset))
    reports.write_metric_report(records, ctx.path(args.out or ctx.output_dir / f"metrics_{args.subset}.tsv"))
    print(reports.format_metric_table(records))


def cmd_embed(ctx: Context, args) -> None:
    write_resolved_config(ctx.config, ctx.output_dir)
    dataset, _ = _load_data(ctx, args.dataset)
    adapter = trainer.load_model(ctx.config, dataset, ctx.path(args.checkpoint or ctx.output_dir / CHECKPOINT_NAME))
    path = reports.write_embeddings(trainer.embedding_rows(adapter, dataset), ctx.path(args.out or ctx.output_dir / "embeddings.tsv"))
    print(path)


def cmd_anp_report(ctx: Context, args) -> None:
    records = []
    for report in args.reports:
        records.extend(reports.read_metric_report(ctx.path(report)))
    records = [r for r in records if r["rows"] == args.rows and r["subset"] == args.subset]
    tensor = build_tensor(records, metrics=args.metrics)
    write_resolved_config(ctx.config, ctx.output_dir)
    reports.write_anp_report(tensor, ctx.path(args.out or ctx.output_dir / "anp.tsv"))
    print(reports.format_anp_table(tensor))


def cmd_templates(ctx: Context, args) -> None:
    rows = template_library.describe()
    columns = list(rows[0]) if rows else []
    print("\t".join(columns))
    for row in rows:
        print("\t".join(",".join(map(str, v)) if isinstance(v, list) else str(v) for v in row.values()))


def cmd_stats(ctx: Context, args) -> None:
    data = ctx.config.data
    dataset = load_dataset(ctx.path(args.dataset), data.task, n_classes=data.n_classes, name=data.name)
    stats = dataset_stats(dataset)
    print("\t".join(stats))
    print("\t".join(f"{v:.2f}" if isinstance(v, float) else str(v) for v in stats.values()))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=APP_NAME, description="Glycans as combinatorial complexes")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--workdir", default=None, help="root for all relative paths (default: GLYCOCC_WORKDIR or .)")
    parser.add_argument("--config", default=None, help="JSON run configuration")
    parser.add_argument("--log-level", default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="print the monosaccharide tree of an IUPAC-condensed string")
    p.add_argument("iupac")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("assemble", help="print SMILES and atom/bond/monomer counts")
    p.add_argument("iupac")
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("build-cc", help="print the skeletons of the glycan's combinatorial complex")
    p.add_argument("iupac")
    p.set_defaults(func=cmd_build_cc)

    p = sub.add_parser("train", help="train a model; writes checkpoint and epoch log")
    p.add_argument("--dataset", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="write a metric report (full and OOD rows)")
    p.add_argument("--dataset", default=None)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--subset", choices=[Partition.VAL.value, Partition.TEST.value], default=Partition.TEST.value)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("embed", help="write final-layer cell embeddings as TSV")
    p.add_argument("--dataset", default=None)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("anp-report", help="accumulated normalized performance over metric reports")
    p.add_argument("reports", nargs="+")
    p.add_argument("--metrics", nargs="+", default=["accuracy", "auroc", "mcc"])
    p.add_argument("--rows", choices=["full", "ood"], default="full")
    p.add_argument("--subset", default=Partition.TEST.value)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_anp_report)

    p = sub.add_parser("templates", help="list the monosaccharide templates with formulas")
    p.set_defaults(func=cmd_templates)

    p = sub.add_parser("stats", help="record count and mean monosaccharides/atoms per glycan")
    p.add_argument("dataset")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    workdir = Path(args.workdir) if args.workdir else settings.workdir
    configure_logging(args.log_level, workdir)
    try:
        config_path = Path(args.config) if args.config else None
        if config_path is not None and not config_path.is_absolute():
            config_path = workdir / config_path
        config = load_run_config(config_path)
        args.func(Context(workdir, config), args)
    except GlycoccError as e:
        subject = getattr(args, "iupac", None) or getattr(args, "dataset", None) or args.command
        print(f"{APP_NAME} {args.command}: {subject}: {e}", file=sys.stderr)
        return e.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
