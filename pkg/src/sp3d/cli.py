"""Command-line entry point."""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from .errors import ConfigError, DataError, ProviderError, Sp3dError

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_PROVIDER = 4


def _die(err: Exception) -> None:
    click.echo(f"error: {err}", err=True)
    if isinstance(err, ConfigError):
        sys.exit(EXIT_CONFIG)
    if isinstance(err, ProviderError):
        sys.exit(EXIT_PROVIDER)
    if isinstance(err, DataError):
        sys.exit(EXIT_DATA)
    sys.exit(1)


def _default_threads() -> int:
    return int(os.environ.get("SP3D_THREADS", "1"))


@click.group()
def main():
    """Zero-shot 3D instance segmentation via multi-view fusion of promptable 2D masks."""


def _pipeline_options(fn):
    opts = [
        click.option("--prompt-ratio", default=0.01, show_default=True),
        click.option("--fps-seed", default=0, show_default=True),
        click.option("--occlusion-tol", default=0.05, show_default=True),
        click.option("--frame-stride", default=1, show_default=True),
        click.option("--theta-retain", default=0.5, show_default=True),
        click.option("--selection-variant", type=click.Choice(["threshold", "soft", "topk"]),
                     default="threshold", show_default=True),
        click.option("--topk", default=0, show_default=True),
        click.option("--min-pred-iou", default=70.0, show_default=True),
        click.option("--min-stability", default=60.0, show_default=True),
        click.option("--nms-box-iou", default=80.0, show_default=True),
        click.option("--dedup-iou", default=0.8, show_default=True),
        click.option("--tau-merge", default=0.25, show_default=True),
        click.option("--min-support", default=1, show_default=True),
        click.option("--k-neighbors", default=16, show_default=True),
        click.option("--provider", type=click.Choice(["oracle", "oracle-noisy", "file"]),
                     default="oracle", show_default=True),
        click.option("--provider-dir", default=None),
        click.option("--noise-morph-radius", default=0, show_default=True),
        click.option("--noise-conf-jitter", default=0.0, show_default=True),
        click.option("--noise-p-spill", default=0.0, show_default=True),
        click.option("--noise-seed", default=0, show_default=True),
        click.option("--depth-scale", default=1000.0, show_default=True),
        click.option("--threads", default=None, type=int,
                     help="defaults to $SP3D_THREADS or 1"),
        click.option("--no-selection", is_flag=True),
        click.option("--no-consolidation", is_flag=True),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _build_config(kw) -> "PipelineConfig":
    from .masks import NoiseSpec
    from .pipeline import PipelineConfig
    from .selection import SelectionConfig

    sel = SelectionConfig(
        theta_retain=kw["theta_retain"],
        nms_box_iou=kw["nms_box_iou"],
        min_predicted_iou=kw["min_pred_iou"],
        min_stability=kw["min_stability"],
        overlap_dedup_iou=kw["dedup_iou"],
        variant=kw["selection_variant"],
        k=kw["topk"],
    )
    return PipelineConfig(
        prompt_ratio=kw["prompt_ratio"],
        fps_seed=kw["fps_seed"],
        occlusion_tol=kw["occlusion_tol"],
        frame_stride=kw["frame_stride"],
        selection=sel,
        selection_enabled=not kw["no_selection"],
        consolidation_enabled=not kw["no_consolidation"],
        tau_merge=kw["tau_merge"],
        min_support=kw["min_support"],
        k_neighbors=kw["k_neighbors"],
        provider=kw["provider"],
        provider_dir=kw["provider_dir"],
        noise=NoiseSpec(kw["noise_morph_radius"], kw["noise_conf_jitter"],
                        kw["noise_p_spill"], kw["noise_seed"]),
        depth_scale=kw["depth_scale"],
        threads=kw["threads"] if kw["threads"] else _default_threads(),
        export_prompts=kw.get("export_prompts", False),
    )


@main.command()
@click.argument("scene_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--export-prompts", is_flag=True,
              help="write per-frame pixel-prompt JSON files for external mask producers")
@_pipeline_options
def segment(scene_dir, out, **kw):
    """Run the full segmentation pipeline on a scene directory."""
    from .pipeline import run_pipeline

    try:
        cfg = _build_config(kw)
        _, manifest = run_pipeline(cfg, scene_dir, out)
    except Sp3dError as e:
        _die(e)
    click.echo(f"segmented {manifest['points']} points across {len(manifest['frames'])} frames; "
               f"{len(manifest['pseudo_prompts'])} instances -> {out}")
    if manifest["coverage_missing"]:
        click.echo(f"warning: {len(manifest['coverage_missing'])} ground-truth instances "
                   f"received no prompt: {manifest['coverage_missing']}", err=True)


@main.command("eval")
@click.option("--pred", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--gt", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--scores", type=click.Path(exists=True, dir_okay=False),
              help="optional run.json-style file with instance scores")
@click.option("--grouped", is_flag=True)
@click.option("--containment", default=0.8, show_default=True)
@click.option("--report", "report_path", type=click.Path(dir_okay=False))
@click.option("--figure", type=click.Path(dir_okay=False))
def eval_cmd(pred, gt, scores, grouped, containment, report_path, figure):
    """Evaluate predicted labels against ground truth labels."""
    from .evaluation import GroundTruth, evaluate, predictions_from_labels
    from .scene_io import load_labels

    try:
        pred_labels = load_labels(pred)
        gt_labels = load_labels(gt)
        if pred_labels.size != gt_labels.size:
            raise DataError("prediction and ground truth label counts differ")
        score_map = None
        if scores:
            payload = json.loads(Path(scores).read_text())
            payload = payload.get("instance_scores", payload)  # accept run.json or a flat map
            try:
                score_map = {int(k): float(v) for k, v in payload.items()}
            except (ValueError, AttributeError):
                raise DataError(f"{scores} holds no instance-score mapping")
        preds = predictions_from_labels(pred_labels, score_map)
        rep = evaluate(preds, GroundTruth(gt_labels), grouped=grouped, containment=containment)
    except Sp3dError as e:
        _die(e)
    payload = rep.to_dict()
    click.echo(json.dumps({k: payload[k] for k in ("ap", "ap50", "ap25", "per_size")}, indent=2))
    if report_path:
        if report_path.endswith(".csv"):
            rows = [("ap", payload["ap"]), ("ap50", payload["ap50"]), ("ap25", payload["ap25"])]
            rows += [(f"ap50/{k}", v) for k, v in payload.get("per_size", {}).items()]
            Path(report_path).write_text("metric,value\n"
                                         + "".join(f"{k},{v}\n" for k, v in rows))
        else:
            Path(report_path).write_text(json.dumps(payload, indent=2))
    if figure:
        from .report import plot_eval_report

        plot_eval_report(payload, figure)


@main.command()
@click.option("--scene", default="room-8", show_default=True,
              help="room-8 | big-floor | clutter-table | path to a custom scene JSON")
@click.option("--frames", default=None, type=int)
@click.option("--seed", default=0, show_default=True)
@click.option("--density", default=None, type=float)
@click.option("--out", required=True, type=click.Path(file_okay=False))
def synth(scene, frames, seed, density, out):
    """Generate a synthetic scene dataset in the pipeline's on-disk formats."""
    from .synthetic import CANONICAL_SCENES, emit_dataset, spec_from_json

    try:
        if scene in CANONICAL_SCENES:
            kwargs = {"seed": seed}
            if frames:
                kwargs["n_frames"] = frames
            if density:
                kwargs["density"] = density
            spec = CANONICAL_SCENES[scene](**kwargs)
        else:
            spec = spec_from_json(scene)
        emit_dataset(spec, out)
    except Sp3dError as e:
        _die(e)
    except FileNotFoundError as e:
        _die(DataError(str(e)))
    click.echo(f"emitted scene {spec.name!r} ({len(spec.cameras)} frames) -> {out}")


@main.command()
@click.argument("scene_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--sweep", multiple=True,
              help="parameter sweep, e.g. --sweep theta_retain=0.3,0.4,0.5")
@click.option("--off-switches", is_flag=True,
              help="add rows disabling selection and consolidation")
@_pipeline_options
def ablate(scene_dir, out, sweep, off_switches, **kw):
    """Run a parameter sweep, evaluate each cell, and write CSV/JSON plus a figure."""
    from .pipeline import run_ablation
    from .report import plot_ablation, write_ablation_table

    try:
        base = _build_config(kw)
        grid: list[dict] = []
        for entry in sweep:
            name, _, values = entry.partition("=")
            for v in values.split(","):
                try:
                    parsed = json.loads(v)
                except json.JSONDecodeError:
                    parsed = v
                grid.append({name: parsed, "tag": f"{name}={v}"})
        if off_switches:
            grid.append({"selection_enabled": False, "tag": "w/o Sel."})
            grid.append({"consolidation_enabled": False, "tag": "w/o Con."})
        rows = run_ablation(base, scene_dir, grid, out)
    except Sp3dError as e:
        _die(e)
    write_ablation_table(rows, out)
    plot_ablation(rows, Path(out) / "ablation.png")
    click.echo(f"{len(rows)} ablation cells -> {out}")


@main.command("export-ply")
@click.option("--labels", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--cloud", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def export_ply(labels, cloud, out):
    """Write a PLY colored deterministically by instance id."""
    from .scene_io import load_labels, load_point_cloud, save_segmentation
    import tempfile

    try:
        lab = load_labels(labels)
        pc = load_point_cloud(cloud)
        with tempfile.NamedTemporaryFile(suffix=".bin") as tmp:
            save_segmentation(lab, pc, tmp.name, out)
    except Sp3dError as e:
        _die(e)
    click.echo(f"wrote {out}")


if __name__ == "__main__":
    main()
