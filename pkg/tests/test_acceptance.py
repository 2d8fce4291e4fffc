"""Acceptance suite: one test per release criterion, at its stated tolerance.

Run with `pytest tests/test_acceptance.py -s` to see one [PASS]/[FAIL] line
per criterion.
"""
import json
import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from posekit.balance import (
    ClassFrequencyTable,
    ClassWeights,
    expected_per_batch,
    expected_positives_per_batch,
    weight,
    weighted_bce,
    weighted_bce_grad,
)
from posekit.dataset import load_coco_keypoints, write_coco_keypoints
from posekit.descriptor import (
    DESCRIPTOR_DIM,
    PoseIndex,
    build_index,
    descriptor,
    knn,
    load_index,
    save_index,
)
from posekit.heatmap import decode_keypoints, encode_target
from posekit.metrics import (
    EvalPair,
    KEYPOINT_GROUPS,
    keypoint_breakdown,
    oks,
    oks_at,
    pckh_at,
    pcpm_at,
    pdj_at,
)
from posekit.skeleton import (
    BoundingBox,
    KeypointId,
    KeypointSigmas,
    Skeleton,
    bbox_from_mask,
    flip_lr,
    padded_crop_region,
)

SIG = KeypointSigmas.default()


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"[FAIL] {name}")
        raise
    else:
        print(f"[PASS] {name}")


def full_skeleton(coords, v=None):
    coords = np.asarray(coords, dtype=np.float64)
    vis = np.full((len(coords), 1), 2.0) if v is None else np.asarray(v, dtype=np.float64).reshape(-1, 1)
    return Skeleton(np.concatenate([coords, vis], axis=1))


def test_expected_per_batch_consistency():
    """Per-batch positives at the published dataset scale: frequencies 0.04%
    and 0.38% with batch 512 give 0.2048 and 1.9456 exactly, rounding to the
    reported 0.2 and 1.9 appearances per batch."""
    with criterion("class-balance: expected per-batch positives (exact arithmetic)"):
        assert expected_per_batch(0.0004, 512) == 0.2048
        assert expected_per_batch(0.0038, 512) == 1.9456
        assert round(expected_per_batch(0.0004, 512), 1) == 0.2
        assert round(expected_per_batch(0.0038, 512), 1) == 1.9
        # Same quantities via an integer-count table at N = 837,000
        # (335 and 3181 positives are the nearest integer counts).
        table = ClassFrequencyTable(
            837_000, np.array([335, 3181]), ("rarest", "median")
        )
        per_batch = expected_positives_per_batch(table, 512)
        assert round(per_batch[0], 1) == 0.2
        assert round(per_batch[1], 1) == 1.9


def test_weight_expectation_identity():
    """E[w(z)] over z ~ Bernoulli(r) equals 1 to 1e-12 for 1,000 random
    rates in (0.0004, 0.5)."""
    with criterion("class-balance: Bernoulli weight expectation = 1 (1e-12)"):
        rng = np.random.default_rng(2024)
        rates = rng.uniform(0.0004, 0.5, size=1000)
        expectation = rates * weight(1.0, rates) + (1 - rates) * weight(0.0, rates)
        assert np.max(np.abs(expectation - 1.0)) <= 1e-12


def test_weighted_bce_gradient():
    """Analytic gradient vs central finite differences: max relative error
    <= 1e-5 over 100 random instances with C <= 50."""
    with criterion("class-balance: BCE gradient vs finite differences (1e-5)"):
        rng = np.random.default_rng(77)
        h = 1e-6
        worst = 0.0
        for _ in range(100):
            c = int(rng.integers(1, 51))
            w = ClassWeights(rng.uniform(0.02, 0.98, c))
            y = (rng.random(c) < 0.5).astype(np.float64)
            yhat = rng.uniform(0.05, 0.95, c)
            grad = weighted_bce_grad(y, yhat, w)
            for j in range(c):
                up, down = yhat.copy(), yhat.copy()
                up[j] += h
                down[j] -= h
                fd = (weighted_bce(y, up, w) - weighted_bce(y, down, w)) / (2 * h)
                worst = max(worst, abs(grad[j] - fd) / max(abs(fd), 1e-12))
        assert worst <= 1e-5


def test_heatmap_round_trip():
    """1,000 random skeletons/boxes: decode(encode) recovers every labeled
    keypoint's grid cell exactly (keypoints at least the smoothing radius
    from the border); with uniform noise of amplitude 0.1 and sigmas >= 3
    cells, the decoded cell stays within 1 cell in >= 99% of trials."""
    with criterion("heatmap: exact round trip, 1000 trials"):
        rng = np.random.default_rng(7)
        grid = 48
        for _ in range(1000):
            side = rng.uniform(40, 120)
            box = BoundingBox(0, 0, side, side)
            coords = rng.uniform(3, grid - 4, size=(25, 2))
            vis = np.where(rng.random(25) < 0.1, 0.0, 2.0)
            vis[0] = 2.0
            skel = full_skeleton(coords, vis)
            dec = decode_keypoints(encode_target(skel, box, SIG, grid, grid))
            labeled = vis > 0
            np.testing.assert_array_equal(
                dec.coords[labeled], np.round(coords[labeled])
            )

    with criterion("heatmap: noisy decode within 1 cell in >= 99% of 1000 trials"):
        rng = np.random.default_rng(8)
        sig3 = KeypointSigmas(np.full(25, 0.03))
        box = BoundingBox(0, 0, 100, 100)  # sigma = 3 cells everywhere
        grid = 48
        hits = 0
        for _ in range(1000):
            coords = rng.uniform(3, grid - 4, size=(25, 2))
            stack = encode_target(full_skeleton(coords), box, sig3, grid, grid)
            noisy = stack + rng.uniform(0, 0.1, size=stack.shape).astype(np.float32)
            dec = decode_keypoints(noisy)
            if np.abs(dec.coords - np.round(coords)).max() <= 1.0:
                hits += 1
        assert hits >= 990


def _random_pair(rng, integer=False):
    coords = rng.uniform(10, 200, size=(25, 2))
    noise = rng.uniform(-12, 12, size=(25, 2))
    if integer:
        coords, noise = np.floor(coords), np.floor(noise)
    box = BoundingBox(0.0, 0.0, 200.0, 150.0)
    return EvalPair(
        gt=full_skeleton(coords), pred=full_skeleton(coords + noise), bbox=box
    )


def _metric_vector(pairs):
    return np.array([
        oks_at(pairs, SIG, 0.5),
        oks_at(pairs, SIG, 0.75),
        pckh_at(pairs).value,
        pdj_at(pairs).value,
        pcpm_at(pairs).value,
    ])


def test_metric_invariances():
    """OKS/PCKh/PDJ/PCPm invariant under translation (exact, integer pixel
    grids) and uniform scaling (<= 1e-9) across 500 random pairs; breakdown
    cells recombine to the keypoint-level aggregates within 1e-12."""
    rng = np.random.default_rng(55)
    # Integer pixel grids make translation exactness testable; continuous
    # coordinates keep threshold comparisons away from exact ties under
    # scaling (a tie would flip a whole count, not drift by 1e-9).
    pairs_int = [_random_pair(rng, integer=True) for _ in range(500)]
    pairs_float = [_random_pair(rng) for _ in range(500)]

    with criterion("metrics: translation invariance (exact) on 500 pairs"):
        base = _metric_vector(pairs_int)
        for _ in range(3):
            tx = float(rng.integers(-5000, 5000))
            ty = float(rng.integers(-5000, 5000))
            moved = []
            for p in pairs_int:
                gt, pred = p.gt.pts.copy(), p.pred.pts.copy()
                gt[:, :2] += (tx, ty)
                pred[:, :2] += (tx, ty)
                moved.append(EvalPair(
                    gt=Skeleton(gt), pred=Skeleton(pred),
                    bbox=BoundingBox(p.bbox.x + tx, p.bbox.y + ty, p.bbox.w, p.bbox.h),
                ))
            np.testing.assert_array_equal(_metric_vector(moved), base)

    with criterion("metrics: uniform scale invariance (1e-9) on 500 pairs"):
        base = _metric_vector(pairs_float)
        for lam in (0.21, 3.7, 54.0):
            scaled = []
            for p in pairs_float:
                gt, pred = p.gt.pts.copy(), p.pred.pts.copy()
                gt[:, :2] *= lam
                pred[:, :2] *= lam
                scaled.append(EvalPair(
                    gt=Skeleton(gt), pred=Skeleton(pred),
                    bbox=BoundingBox(
                        p.bbox.x * lam, p.bbox.y * lam, p.bbox.w * lam, p.bbox.h * lam
                    ),
                ))
            np.testing.assert_allclose(_metric_vector(scaled), base, atol=1e-9)

    with criterion("metrics: breakdown recombines to aggregates (1e-12)"):
        report = keypoint_breakdown(pairs_float, SIG)
        for metric, aggregate in report.keypoint_level.items():
            correct = sum(report.per_keypoint[g][metric].correct for g, _ in KEYPOINT_GROUPS)
            evaluated = sum(
                report.per_keypoint[g][metric].evaluated for g, _ in KEYPOINT_GROUPS
            )
            assert abs(correct / evaluated - aggregate.value) <= 1e-12
        limb_correct = sum(c.correct for c in report.per_limb.values())
        limb_evaluated = sum(c.evaluated for c in report.per_limb.values())
        assert abs(limb_correct / limb_evaluated - report.pcpm.value) <= 1e-12


def test_oks_spot_values():
    """pred == gt gives exactly 1.0; a single-keypoint error of
    s * kappa * sqrt(2) gives exp(-1) within 1e-12."""
    with criterion("metrics: OKS spot values (exact / 1e-12)"):
        rng = np.random.default_rng(3)
        perfect = _random_pair(rng)
        perfect = EvalPair(gt=perfect.gt, pred=perfect.gt.copy(), bbox=perfect.bbox)
        assert oks(perfect, SIG) == 1.0

        box = BoundingBox(0, 0, 120, 60)
        d = math.sqrt(box.area) * SIG.values[KeypointId.NOSE] * math.sqrt(2)
        gt = np.zeros((25, 3))
        pred = np.zeros((25, 3))
        gt[0] = (40, 30, 2)
        pred[0] = (40 + d, 30, 2)
        pair = EvalPair(gt=Skeleton(gt), pred=Skeleton(pred), bbox=box)
        assert abs(oks(pair, SIG) - math.exp(-1)) <= 1e-12


def test_descriptor_contract():
    """Length 300; translation invariance exact (integer grids); rotation
    invariance with a fixed normalizer and scale invariance within 1e-6;
    1,000 random trials each."""
    rng = np.random.default_rng(99)
    box = BoundingBox(0, 0, 128, 96)

    with criterion("descriptor: 300-dimensional (25 choose 2)"):
        d = descriptor(full_skeleton(rng.uniform(0, 100, (25, 2))), box)
        assert d.shape == (300,) == (DESCRIPTOR_DIM,)

    with criterion("descriptor: translation invariance exact, 1000 trials"):
        for _ in range(1000):
            coords = np.floor(rng.uniform(0, 500, (25, 2)))
            offset = rng.integers(-10_000, 10_000, size=2).astype(np.float64)
            np.testing.assert_array_equal(
                descriptor(full_skeleton(coords + offset), box),
                descriptor(full_skeleton(coords), box),
            )

    with criterion("descriptor: rotation invariance (fixed normalizer, 1e-6), 1000 trials"):
        for _ in range(1000):
            coords = rng.uniform(0, 200, (25, 2))
            theta = rng.uniform(-math.pi, math.pi)
            c, s = math.cos(theta), math.sin(theta)
            centered = coords - coords.mean(axis=0)
            rotated = np.stack(
                [centered[:, 0] * c - centered[:, 1] * s,
                 centered[:, 0] * s + centered[:, 1] * c], axis=1
            ) + coords.mean(axis=0)
            np.testing.assert_allclose(
                descriptor(full_skeleton(rotated), box),
                descriptor(full_skeleton(coords), box),
                atol=1e-6,
            )

    with criterion("descriptor: scale invariance (1e-6), 1000 trials"):
        for _ in range(1000):
            coords = rng.uniform(0, 200, (25, 2))
            lam = rng.uniform(0.05, 20.0)
            np.testing.assert_allclose(
                descriptor(
                    full_skeleton(coords * lam),
                    BoundingBox(0, 0, 128 * lam, 96 * lam),
                ),
                descriptor(full_skeleton(coords), box),
                atol=1e-6,
            )


def test_knn_exactness_against_oracle():
    """Identical output (ids, distances and tie-breaks) to a quadratic
    oracle on 200 randomized instances with index sizes <= 2,000."""
    with criterion("knn: exact match vs quadratic oracle, 200 instances"):
        rng = np.random.default_rng(11)
        for trial in range(200):
            n = int(rng.integers(1, 2001))
            dim = 300 if trial % 4 == 0 else int(rng.integers(4, 64))
            rows = rng.random((n, dim), dtype=np.float32)
            if n >= 2:  # inject exact duplicates to exercise tie-breaking
                a, b = rng.integers(0, n, size=2)
                rows[a] = rows[b]
            ids = tuple(f"item{i:05d}" for i in rng.permutation(n))
            index = PoseIndex(ids, rows)
            q = rows[int(rng.integers(0, n))] if trial % 3 == 0 else rng.random(dim, dtype=np.float32)
            k = int(rng.integers(1, 16))

            scored = sorted(
                ((float(np.square((row - q).astype(np.float64)).sum()), row_id)
                 for row_id, row in zip(ids, rows)),
                key=lambda item: (item[0], item[1]),
            )[:k]
            expected = [(row_id, math.sqrt(d2)) for d2, row_id in scored]
            got = [(r.id, r.distance) for r in knn(index, q, k)]
            assert got == expected


def test_retrieval_at_production_scale(tmp_path):
    """A synthetic 136,000-row, 300-dim index built from streamed skeletons;
    a single exact query completes in <= 100 ms single-threaded; the index
    file round-trips bit-exactly."""
    rng = np.random.default_rng(136)
    box = BoundingBox(0, 0, 100, 100)
    all_coords = rng.uniform(0, 100, size=(136_000, 25, 2))

    def stream():
        vis = np.full((25, 1), 2.0)
        for i in range(all_coords.shape[0]):
            yield (
                f"pose{i:06d}",
                Skeleton(np.concatenate([all_coords[i], vis], axis=1)),
                box,
            )

    with criterion("retrieval: 136,000-row index builds"):
        result = build_index(stream())
        index = result.index
        assert len(index) == 136_000
        assert index.dim == 300
        assert not result.skipped

    with criterion("retrieval: single exact query <= 100 ms at 136k x 300"):
        q = descriptor(
            Skeleton(np.concatenate([all_coords[500], np.full((25, 1), 2.0)], axis=1)),
            box,
        )
        knn(index, q, 5)  # warm up
        timings = []
        for _ in range(5):
            start = time.perf_counter()
            results = knn(index, q, 5)
            timings.append(time.perf_counter() - start)
        assert results[0].id == "pose000500"
        assert results[0].distance == 0.0
        timings.sort()
        median = timings[len(timings) // 2]
        print(f"  query latency: median {median * 1e3:.1f} ms "
              f"(min {timings[0] * 1e3:.1f} ms)")
        assert median <= 0.100

    with criterion("retrieval: index save/load round trip is bit-exact"):
        path = tmp_path / "full_scale.pkix"
        save_index(index, path)
        loaded = load_index(path)
        assert loaded.ids == index.ids
        assert loaded.rows.tobytes() == index.rows.tobytes()

    with criterion("retrieval: service query end-to-end <= 150 ms at 136k"):
        from fastapi.testclient import TestClient

        from posekit.service import ServiceConfig, create_app

        app = create_app(ServiceConfig(index_path=str(path)))
        body = {
            "v": 1,
            "keypoints": [[float(x), float(y), 2] for x, y in all_coords[500]],
            "bbox": [0, 0, 100, 100],
            "k": 5,
        }
        with TestClient(app) as client:
            client.post("/query", json=body)  # warm up
            timings = []
            for _ in range(5):
                start = time.perf_counter()
                resp = client.post("/query", json=body)
                timings.append(time.perf_counter() - start)
            assert resp.status_code == 200
            assert resp.json()["results"][0]["id"] == "pose000500"
            timings.sort()
            median = timings[len(timings) // 2]
            print(f"  end-to-end latency: median {median * 1e3:.1f} ms")
            assert median <= 0.150


def test_geometry_fixtures():
    """bbox_from_mask and padded_crop_region reproduce ten hand-computed
    fixtures exactly; flip involution holds for 1,000 random skeletons on
    integer pixel grids."""
    with criterion("geometry: 10 hand-computed mask/crop fixtures (exact)"):
        def mask_with(cells, shape=(12, 12), value=1.0):
            mask = np.zeros(shape)
            for x, y in cells:
                mask[y, x] = value
            return mask

        assert bbox_from_mask(np.zeros((8, 8))) is None                      # 1
        b = bbox_from_mask(mask_with([(3, 7)]))                              # 2
        assert (b.x, b.y, b.w, b.h) == (3, 7, 1, 1)
        b = bbox_from_mask(mask_with([(2, 2), (9, 5)]))                      # 3
        assert (b.x, b.y, b.w, b.h) == (2, 2, 8, 4)
        b = bbox_from_mask(np.ones((5, 9)))                                  # 4
        assert (b.x, b.y, b.w, b.h) == (0, 0, 9, 5)
        b = bbox_from_mask(mask_with([(4, r) for r in range(1, 7)]))         # 5
        assert (b.x, b.y, b.w, b.h) == (4, 1, 1, 6)
        half = mask_with([(1, 1)], value=0.5) + mask_with([(6, 6)], value=0.49)
        b = bbox_from_mask(half)                                             # 6
        assert (b.x, b.y, b.w, b.h) == (1, 1, 1, 1)
        b = bbox_from_mask(mask_with([(0, 0), (0, 4), (3, 4)]))              # 7
        assert (b.x, b.y, b.w, b.h) == (0, 0, 4, 5)

        crop = padded_crop_region(BoundingBox(4, 6, 10, 10), 100, 100, 0.0)  # 8
        assert (crop.x, crop.y, crop.w, crop.h) == (4, 6, 10, 10)
        crop = padded_crop_region(BoundingBox(0, 0, 100, 50), 500, 500, 0.10)  # 9
        assert (crop.x, crop.y, crop.w, crop.h) == (-10, -35, 120, 120)
        crop = padded_crop_region(BoundingBox(10, 20, 30, 60), 80, 120, 0.25)  # 10
        assert (crop.x, crop.y, crop.w, crop.h) == (-20, 5, 90, 90)

    with criterion("geometry: flip involution, 1000 random skeletons (exact)"):
        rng = np.random.default_rng(4)
        for _ in range(1000):
            width = int(rng.integers(2, 4000))
            coords = np.floor(rng.uniform(0, width, size=(25, 2)))
            vis = rng.integers(0, 3, size=25).astype(np.float64)
            skel = full_skeleton(coords, vis)
            again = flip_lr(flip_lr(skel, width), width)
            assert np.array_equal(again.pts, skel.pts)


def test_dataset_round_trip_487(tmp_path):
    """write(load(x)) identity on a 487-record synthetic test split, with
    coordinate drift <= 1e-6 and discrete fields exact."""
    with criterion("dataset-io: 487-record write/load identity (1e-6)"):
        rng = np.random.default_rng(487)
        annotations = []
        images = []
        for i in range(487):
            flat = []
            for _ in range(17):
                x, y = rng.uniform(0, 512, 2)
                flat += [float(x), float(y), int(rng.integers(1, 3))]
            flat[2] = 0  # keep some unlabeled slots in the mix
            images.append({"id": i, "file_name": f"test{i:04d}.png"})
            annotations.append({
                "id": i,
                "image_id": i,
                "keypoints": flat,
                "bbox": [float(rng.uniform(0, 50)), float(rng.uniform(0, 50)),
                         float(rng.uniform(50, 400)), float(rng.uniform(50, 400))],
                "tags": ["full_body"] if i % 3 == 0 else [],
            })
        doc = {"images": images, "annotations": annotations}

        records = load_coco_keypoints(doc).records
        assert len(records) == 487
        path = tmp_path / "test_split.json"
        write_coco_keypoints(records, path)
        reloaded = load_coco_keypoints(json.loads(path.read_text())).records
        assert len(reloaded) == 487
        for a, b in zip(records, reloaded):
            assert a.image_id == b.image_id
            assert a.file_name == b.file_name
            assert a.tags == b.tags
            assert a.provenance == b.provenance
            np.testing.assert_allclose(b.skeleton.coords, a.skeleton.coords, atol=1e-6)
            np.testing.assert_array_equal(b.skeleton.vis, a.skeleton.vis)
            assert (b.bbox.x, b.bbox.y, b.bbox.w, b.bbox.h) == (
                a.bbox.x, a.bbox.y, a.bbox.w, a.bbox.h
            )
