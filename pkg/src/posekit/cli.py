"""posekit command line: evaluation reports, index building/query, the service."""
from __future__ import annotations

import json
from pathlib import Path

import click
import numpy as np

from . import dataset
from .descriptor import build_index, descriptor, knn, load_index, save_index
from .heatmap import decode_keypoints, encode_target, read_heatmap_stack, write_heatmap_stack
from .metrics import keypoint_breakdown
from .skeleton import (
    KEYPOINT_NAMES,
    NUM_COCO_KEYPOINTS,
    BoundingBox,
    KeypointSigmas,
    Skeleton,
    derive_midpoints,
)


@click.group()
def main() -> None:
    """Keypoint-geometry toolkit and pose-guided retrieval engine."""


@main.command("eval")
@click.option("--gt", "gt_path", required=True, type=click.Path(exists=True))
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--sigmas", "sigma_path", type=click.Path(exists=True, dir_okay=False),
              help="Falloff table; defaults to the built-in COCO constants.")
@click.option("--report", "report_path", required=True, type=click.Path(dir_okay=False))
@click.option("--figures/--no-figures", default=True,
              help="Render breakdown figures next to the report.")
def eval_cmd(gt_path: str, pred_path: str, sigma_path: str | None,
             report_path: str, figures: bool) -> None:
    """Evaluate predictions against ground truth and write a versioned report.

    Inputs are COCO keypoint files or directories of them (traversed in
    lexicographic order).  Alongside the JSON report, the per-keypoint and
    per-limb breakdowns are written as CSV, and figures are rendered into a
    sibling directory.
    """
    sig = KeypointSigmas.load(sigma_path) if sigma_path else KeypointSigmas.default()
    try:
        gt_result = dataset.load_coco_keypoints(gt_path)
        pred_result = dataset.load_coco_keypoints(pred_path)
        pairs, unmatched_gt, unmatched_pred = dataset.match_pairs(
            gt_result.records, pred_result.records
        )
    except ValueError as exc:
        raise click.ClickException(str(exc)) from exc
    if not pairs:
        raise click.ClickException("no matching gt/pred pairs to evaluate")
    report = keypoint_breakdown(pairs, sig)

    doc = report.to_dict()
    doc["inputs"] = {
        "gt": str(gt_path),
        "pred": str(pred_path),
        "rejected_gt": [[r.location, r.reason] for r in gt_result.rejected],
        "rejected_pred": [[r.location, r.reason] for r in pred_result.rejected],
        "unmatched_gt": list(unmatched_gt),
        "unmatched_pred": list(unmatched_pred),
    }
    out = Path(report_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(doc, indent=2))

    from . import report as report_mod

    stem = out.with_suffix("")
    csv_paths = [
        report_mod.write_keypoint_csv(report, Path(f"{stem}_keypoints.csv")),
        report_mod.write_limb_csv(report, Path(f"{stem}_limbs.csv")),
    ]
    figure_paths = []
    if figures:
        figure_paths = report_mod.render_figures(report, Path(f"{stem}_figures"))

    for name, value in report.aggregates.items():
        click.echo(f"{name}: {value:.4f}")
    click.echo(
        f"pairs: {len(pairs)}  skipped: pckh={report.pckh.skipped} "
        f"pdj={report.pdj.skipped} pcpm_limbs={report.pcpm.skipped}"
    )
    for path in [out, *csv_paths, *figure_paths]:
        click.echo(f"wrote {path}")


@main.group()
def index() -> None:
    """Build and query descriptor indexes."""


@index.command("build")
@click.option("--annotations", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def index_build(annotations: str, out_path: str) -> None:
    """Build a descriptor index from a COCO keypoint file or directory."""
    result = dataset.load_coco_keypoints(annotations)
    build = build_index(
        (str(rec.image_id), rec.skeleton, rec.bbox) for rec in result.records
    )
    save_index(build.index, out_path)
    click.echo(f"indexed {len(build.index)} poses -> {out_path}")
    if result.rejected:
        click.echo(f"rejected {len(result.rejected)} annotations at load")
    if build.skipped:
        click.echo(f"skipped {len(build.skipped)} items:")
        for item_id, reason in build.skipped:
            click.echo(f"  {item_id}: {reason}")


@index.command("query")
@click.option("--idx", "index_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--query", "query_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("-k", default=5, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False),
              help="Write results as CSV instead of stdout.")
def index_query(index_path: str, query_path: str, k: int, out_path: str | None) -> None:
    """Query an index with a COCO annotation file or a bare keypoints file.

    Results print as "rank,id,distance" lines.
    """
    idx = load_index(index_path)
    skel, box = _load_query(query_path)
    results = knn(idx, descriptor(skel, box), k)
    lines = ["rank,id,distance"]
    lines += [f"{rank},{r.id},{r.distance:.8f}" for rank, r in enumerate(results, start=1)]
    text = "\n".join(lines) + "\n"
    if out_path:
        Path(out_path).write_text(text)
        click.echo(f"wrote {out_path}")
    else:
        click.echo(text, nl=False)


def _load_query(path: str) -> tuple[Skeleton, BoundingBox | None]:
    doc = json.loads(Path(path).read_text())
    if "annotations" in doc:
        result = dataset.load_coco_keypoints(doc)
        if not result.records:
            raise click.ClickException(f"{path}: no usable annotation records")
        rec = result.records[0]
        return rec.skeleton, rec.bbox
    if "keypoints" in doc:
        skel = Skeleton(np.asarray(doc["keypoints"], dtype=np.float64))
        if skel.num_keypoints == NUM_COCO_KEYPOINTS:
            skel = derive_midpoints(skel)
        box = BoundingBox(*doc["bbox"]) if doc.get("bbox") else None
        return skel, box
    raise click.ClickException(f"{path}: expected a COCO document or a keypoints file")


@main.command("serve")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
def serve_cmd(config_path: str) -> None:
    """Run the query service described by a JSON config file."""
    from .service import ServiceConfig, serve

    serve(ServiceConfig.load(config_path))


@main.command("sigmas")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def sigmas_cmd(out_path: str) -> None:
    """Write the default falloff-constant table."""
    KeypointSigmas.default().dump(out_path)
    click.echo(f"wrote {out_path}")


@main.group()
def heatmap() -> None:
    """Encode and decode heatmap stacks."""


@heatmap.command("encode")
@click.option("--annotations", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--sigmas", "sigma_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--size", nargs=2, type=int, default=(64, 64), show_default=True,
              help="Grid width and height.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def heatmap_encode(annotations: str, sigma_path: str | None,
                   size: tuple[int, int], out_path: str) -> None:
    """Encode the first annotation of a COCO file as a heatmap stack."""
    sig = KeypointSigmas.load(sigma_path) if sigma_path else KeypointSigmas.default()
    result = dataset.load_coco_keypoints(annotations)
    if not result.records:
        raise click.ClickException(f"{annotations}: no usable annotation records")
    rec = result.records[0]
    stack = encode_target(rec.skeleton, rec.bbox, sig, size[0], size[1])
    write_heatmap_stack(stack, out_path)
    click.echo(f"wrote {out_path} ({stack.shape[0]}x{stack.shape[2]}x{stack.shape[1]})")


@heatmap.command("decode")
@click.option("--stack", "stack_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--smooth-sigma", default=1.0, show_default=True)
def heatmap_decode(stack_path: str, smooth_sigma: float) -> None:
    """Decode a heatmap stack, printing "name,x,y" lines."""
    stack = read_heatmap_stack(stack_path)
    skel = decode_keypoints(stack, smooth_sigma)
    click.echo("keypoint,x,y")
    for i in range(skel.num_keypoints):
        kp = skel.keypoint(i)
        name = KEYPOINT_NAMES[i] if i < len(KEYPOINT_NAMES) else str(i)
        click.echo(f"{name},{kp.x:g},{kp.y:g}")


if __name__ == "__main__":
    main(prog_name="posekit")
