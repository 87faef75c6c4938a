"""Experiment harness: configs, seeding, persistence, and the four commands.

Seed scheme: every stochastic stage derives its own integer seed from the
master seed through numpy's SeedSequence with a documented entropy tuple,

    seed(tag, index) = SeedSequence((master_seed, STREAM[tag], index)).generate_state(1)[0]

so streams are independent and reproducible. STREAM tags: "init" (member
initializations, indexed by member), "sgd" (mini-batch shuffling, by member),
"pairs" (survey pair sampling, by set), "subset" (landscape subset draw).

Artifacts under the output directory:

    manifest.json            config snapshot, seeds, artifact checksums
    run_info.json            wall-clock timings (deliberately not in the manifest)
    solutions/<set>.json     provenance of each stored solution set
    solutions/<set>/m*.bin   parameter vectors (binary, see write_solution)
    traces/*.json            per-run loss traces
    paths/*.jsonl            one path report per line
    histograms/*.csv         height histograms (bin edges and counts)
    kpca/*.csv               component scores with set labels
    stats/*.json|csv         shell and component statistics

All JSON is written with sorted keys; reruns with the same config and master
seed reproduce every manifest-listed artifact byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import logging
import struct
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import __version__
from . import nets
from .geometry import (KernelKind, component_stats, kpca_fit, shell_stats)
from .landscape import GaussianMixture2D, W1, W2, nn_landscape
from .mnist import Dataset, load_idx_file, standard_split
from .nets import Batch, autoencoder_spec, fcp_spec, init_params
from .optim import GssConfig, lbfgs_gss_run, sgd_run
from .paths import (FourierPath, PathLossConfig, barrier_survey, path_loss,
                    synthetic_path_config)

log = logging.getLogger("losspaths")

CONFIG_VERSION = 1
SOLUTION_MAGIC = b"LPSV"
SOLUTION_VERSION = 1

STREAM = {"init": 0, "sgd": 1, "pairs": 2, "subset": 3}

SET_LABELS = ("bfgs_train", "bfgs_test", "sgd_train", "sgd_test")


def run_seed(master_seed, tag, index=0):
    """The derived integer seed for one stochastic stage (see module doc)."""
    ss = np.random.SeedSequence((int(master_seed), STREAM[tag], int(index)))
    return int(ss.generate_state(1)[0])


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    """Everything one experiment needs; serializable to/from versioned JSON."""

    architecture: str = "fcp"
    train_images: str = ""
    train_labels: str = ""
    test_images: str = ""
    test_labels: str = ""
    train_cap: int = 5_000
    ensemble_size: int = 12
    select_count: int = 8
    sgd_lr: float = 0.1
    sgd_batch_size: int = 64
    sgd_epochs: int = 30
    lbfgs_iterations: int = 150
    lbfgs_memory: int = 10
    gss_tolerance: float = 1e-3
    path_lam: float = 1e-4
    path_n_fourier: int = 10
    path_n_points: int = 50
    path_iterations: int = 100
    path_learning_rate: float = 0.01
    n_pairs: int = 10
    landscape_subset: int = 500
    kernel: str = "rbf"
    kernel_degree: int = 2
    kernel_offset: float = 1.0
    kernel_bandwidth: float = 0.0  # 0 means "use N_prm"
    n_components: int = 2
    master_seed: int = 0
    workers: int = 1
    output_dir: str = "out"

    def __post_init__(self):
        if self.architecture not in ("fcp", "autoencoder"):
            raise ValueError(f"unknown architecture {self.architecture!r}")
        if self.select_count > self.ensemble_size:
            raise ValueError("select_count cannot exceed ensemble_size")
        if self.ensemble_size < 1:
            raise ValueError("ensemble_size must be >= 1")
        if self.kernel not in ("linear", "polynomial", "rbf"):
            raise ValueError(f"unknown kernel {self.kernel!r}")

    def spec(self):
        return fcp_spec() if self.architecture == "fcp" else autoencoder_spec()

    def kernel_kind(self):
        if self.kernel == "linear":
            return KernelKind("linear")
        if self.kernel == "polynomial":
            return KernelKind("polynomial", degree=self.kernel_degree,
                              offset=self.kernel_offset)
        bandwidth = self.kernel_bandwidth or float(self.spec().param_count)
        return KernelKind("rbf", bandwidth=bandwidth)

    def gss_config(self):
        return GssConfig(tolerance=self.gss_tolerance)

    def path_config(self):
        return PathLossConfig(
            lam=self.path_lam,
            n_fourier=self.path_n_fourier,
            n_points=self.path_n_points,
            iterations=self.path_iterations,
            learning_rate=self.path_learning_rate,
        )

    def to_dict(self):
        d = asdict(self)
        d["config_version"] = CONFIG_VERSION
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        version = d.pop("config_version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise ValueError(f"unsupported config version {version}")
        known = {f.name for f in cls.__dataclass_fields__.values()}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# persistence helpers
# ---------------------------------------------------------------------------

def spec_hash(spec):
    """sha256 of the canonical architecture description (32 raw bytes)."""
    desc = json.dumps({
        "layer_sizes": list(spec.layer_sizes),
        "activations": list(spec.activations),
        "use_bias": list(spec.use_bias),
        "loss_kind": spec.loss_kind,
    }, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(desc.encode()).digest()


def write_solution(path, spec, vector):
    """Store a parameter vector: magic, version, spec hash, count, float64 LE."""
    v = np.ascontiguousarray(vector, dtype="<f8")
    if v.size != spec.param_count:
        raise ValueError("vector length does not match the spec")
    with open(path, "wb") as fh:
        fh.write(SOLUTION_MAGIC)
        fh.write(struct.pack("<I", SOLUTION_VERSION))
        fh.write(spec_hash(spec))
        fh.write(struct.pack("<Q", v.size))
        fh.write(v.tobytes())


def read_solution(path, spec=None):
    """Load a parameter vector, verifying the header (and spec if given)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != SOLUTION_MAGIC:
        raise ValueError(f"{path}: not a solution file (bad magic)")
    (version,) = struct.unpack("<I", data[4:8])
    if version != SOLUTION_VERSION:
        raise ValueError(f"{path}: unsupported solution version {version}")
    stored_hash = data[8:40]
    (count,) = struct.unpack("<Q", data[40:48])
    body = data[48:]
    if len(body) != 8 * count:
        raise ValueError(f"{path}: truncated body ({len(body)} bytes for {count} values)")
    if spec is not None:
        if stored_hash != spec_hash(spec):
            raise ValueError(f"{path}: architecture hash mismatch")
        if count != spec.param_count:
            raise ValueError(f"{path}: length {count} != spec N_prm {spec.param_count}")
    return np.frombuffer(body, dtype="<f8").copy()


def write_json(path, obj):
    """Deterministic JSON: sorted keys, indented, trailing newline."""
    text = json.dumps(obj, sort_keys=True, indent=2)
    Path(path).write_text(text + "\n", encoding="utf-8")


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_csv_cell(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _csv_cell(v):
    if isinstance(v, float):
        return repr(v)  # shortest round-trip decimal, full 64-bit precision
    return str(v)


def file_sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------

def _manifest_path(out_dir):
    return Path(out_dir) / "manifest.json"


def update_manifest(out_dir, config, seeds, new_artifacts):
    """Merge freshly written artifacts (relpath -> sha256) into manifest.json."""
    path = _manifest_path(out_dir)
    if path.exists():
        manifest = json.loads(path.read_text(encoding="utf-8"))
    else:
        manifest = {
            "format_version": 1,
            "package_version": __version__,
            "config": config.to_dict(),
            "seeds": {},
            "artifacts": {},
        }
    manifest["seeds"].update(seeds)
    manifest["artifacts"].update(new_artifacts)
    write_json(path, manifest)


def _collect_artifacts(out_dir, relpaths):
    out = Path(out_dir)
    return {rel: file_sha256(out / rel) for rel in relpaths}


def append_run_info(out_dir, phase, info):
    """Wall-clock timings and other non-reproducible run metadata."""
    path = Path(out_dir) / "run_info.json"
    data = json.loads(path.read_text(encoding="utf-8")) if path.exists() else {}
    data[phase] = info
    write_json(path, data)


# ---------------------------------------------------------------------------
# solution sets
# ---------------------------------------------------------------------------

@dataclass
class SolutionSet:
    """A labeled ensemble of optimized parameter vectors with provenance."""

    label: str
    architecture: str
    optimizer: str
    vectors: list = field(default_factory=list)
    members: list = field(default_factory=list)  # provenance dicts

    def __len__(self):
        return len(self.vectors)


def _store_solution_set(out_dir, spec, sset):
    sol_dir = Path(out_dir) / "solutions" / sset.label
    sol_dir.mkdir(parents=True, exist_ok=True)
    relpaths = []
    for prov, vec in zip(sset.members, sset.vectors):
        rel = f"solutions/{sset.label}/m{prov['member']:03d}.bin"
        write_solution(Path(out_dir) / rel, spec, vec)
        prov["file"] = rel
        relpaths.append(rel)
    meta_rel = f"solutions/{sset.label}.json"
    write_json(Path(out_dir) / meta_rel, {
        "label": sset.label,
        "architecture": sset.architecture,
        "optimizer": sset.optimizer,
        "members": sset.members,
    })
    relpaths.append(meta_rel)
    return relpaths


def load_solution_set(out_dir, label, spec):
    """Read a stored solution set (vectors plus provenance) back."""
    meta_path = Path(out_dir) / "solutions" / f"{label}.json"
    if not meta_path.exists():
        raise FileNotFoundError(f"no stored solution set {label!r} under {out_dir}")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    sset = SolutionSet(label=label, architecture=meta["architecture"],
                       optimizer=meta["optimizer"], members=meta["members"])
    for prov in sset.members:
        sset.vectors.append(read_solution(Path(out_dir) / prov["file"], spec))
    return sset


# ---------------------------------------------------------------------------
# data loading
# ---------------------------------------------------------------------------

def load_datasets(config):
    train_images = load_idx_file(config.train_images, "images")
    train_labels = load_idx_file(config.train_labels, "labels")
    test_images = load_idx_file(config.test_images, "images")
    test_labels = load_idx_file(config.test_labels, "labels")
    return standard_split(train_images, train_labels, test_images, test_labels,
                          train_cap=config.train_cap)


def _landscape_batch(config, spec, dataset):
    """The (possibly subsampled) batch defining a desk-scale NN landscape."""
    n = len(dataset)
    take = min(config.landscape_subset, n) if config.landscape_subset else n
    rng = np.random.default_rng(run_seed(config.master_seed, "subset"))
    idx = np.sort(rng.choice(n, size=take, replace=False))
    recon = spec.loss_kind == "mean_squared_error"
    images = dataset.images[idx]
    targets = images if recon else dataset.labels[idx]
    return Batch(images, targets), idx


# ---------------------------------------------------------------------------
# cmd_train
# ---------------------------------------------------------------------------

def _train_member(args):
    """One ensemble member: the same init run through both optimizers."""
    (spec, train, test, k, init_seed, shuffle_seed, sgd_opts, lbfgs_opts) = args
    params0 = init_params(spec, init_seed)
    out = {"member": k, "init_seed": init_seed}
    try:
        out["sgd"] = sgd_run(spec, params0, train, test, seed=shuffle_seed,
                             **sgd_opts)
    except RuntimeError as exc:
        out["sgd_error"] = str(exc)
    try:
        out["lbfgs"] = lbfgs_gss_run(spec, params0, train, test, **lbfgs_opts)
    except RuntimeError as exc:
        out["lbfgs_error"] = str(exc)
    return out


def cmd_train(config, out_dir=None):
    """Train the ensemble with both optimizers and store the four solution sets."""
    t0 = time.perf_counter()
    out = Path(out_dir or config.output_dir)
    (out / "traces").mkdir(parents=True, exist_ok=True)
    spec = config.spec()
    train, test = load_datasets(config)

    sgd_opts = dict(lr=config.sgd_lr, batch_size=config.sgd_batch_size,
                    epochs=config.sgd_epochs)
    lbfgs_opts = dict(iterations=config.lbfgs_iterations,
                      memory=config.lbfgs_memory, gss=config.gss_config())
    tasks = []
    seeds = {}
    for k in range(config.ensemble_size):
        init_seed = run_seed(config.master_seed, "init", k)
        shuffle_seed = run_seed(config.master_seed, "sgd", k)
        seeds[f"init/{k}"] = init_seed
        seeds[f"sgd/{k}"] = shuffle_seed
        tasks.append((spec, train, test, k, init_seed, shuffle_seed,
                      sgd_opts, lbfgs_opts))

    if config.workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_train_member, tasks))
    else:
        results = [_train_member(t) for t in tasks]

    relpaths = []
    runs = {"sgd": [], "lbfgs": []}
    for res in results:
        k = res["member"]
        for opt in ("sgd", "lbfgs"):
            if f"{opt}_error" in res:
                log.warning("member %d %s run failed: %s", k, opt, res[f"{opt}_error"])
                continue
            trace = res[opt]
            runs[opt].append((k, res["init_seed"], trace))
            rel = f"traces/{opt}_m{k:03d}.json"
            write_json(out / rel, trace.to_json_dict())
            relpaths.append(rel)

    sets = {}
    for opt, prefix in (("lbfgs", "bfgs"), ("sgd", "sgd")):
        survivors = sorted(runs[opt], key=lambda r: r[2].best_train_loss)
        if len(survivors) < config.select_count:
            log.warning("%s: only %d surviving runs for select_count %d",
                        opt, len(survivors), config.select_count)
        chosen = survivors[:config.select_count]
        for which in ("train", "test"):
            label = f"{prefix}_{which}"
            sset = SolutionSet(label=label, architecture=config.architecture,
                               optimizer=opt)
            for k, init_seed, trace in chosen:
                if which == "train":
                    vec = trace.best_train_params
                    epoch = trace.best_train_epoch
                    sel_loss = trace.best_train_loss
                else:
                    vec = trace.best_test_params
                    epoch = trace.best_test_epoch
                    sel_loss = trace.best_test_loss
                sset.vectors.append(vec)
                sset.members.append({
                    "member": k,
                    "init_seed": init_seed,
                    "selection_epoch": int(epoch),
                    "selection_loss": float(sel_loss),
                })
            relpaths.extend(_store_solution_set(out, spec, sset))
            sets[label] = sset

    update_manifest(out, config, seeds, _collect_artifacts(out, relpaths))
    append_run_info(out, "train", {"wall_time_s": time.perf_counter() - t0})
    return sets


# ---------------------------------------------------------------------------
# cmd_pathsurvey
# ---------------------------------------------------------------------------

def cmd_pathsurvey(config, out_dir=None, solutions_dir=None, landscape_choice="train"):
    """Barrier-height survey of stored solution sets on one NN landscape."""
    if landscape_choice not in ("train", "test"):
        raise ValueError("landscape_choice must be 'train' or 'test'")
    t0 = time.perf_counter()
    out = Path(out_dir or config.output_dir)
    src = Path(solutions_dir) if solutions_dir else out
    (out / "paths").mkdir(parents=True, exist_ok=True)
    (out / "histograms").mkdir(parents=True, exist_ok=True)
    (out / "stats").mkdir(parents=True, exist_ok=True)
    spec = config.spec()

    # the test landscape is surveyed only for the test-selected sets
    labels = SET_LABELS if landscape_choice == "train" else ("bfgs_test", "sgd_test")
    sets = {label: load_solution_set(src, label, spec) for label in labels}
    for label, sset in sets.items():
        if len(sset) < 2:
            raise ValueError(f"solution set {label!r} has fewer than 2 members")

    train, test = load_datasets(config)
    dataset = train if landscape_choice == "train" else test
    batch, subset_idx = _landscape_batch(config, spec, dataset)
    land = nn_landscape(spec, batch, tag=f"{landscape_choice}[{len(subset_idx)}]")

    pcfg = config.path_config()
    relpaths = []
    seeds = {}
    medians = {}
    for si, (label, sset) in enumerate(sorted(sets.items())):
        seed = run_seed(config.master_seed, "pairs", si)
        seeds[f"pairs/{label}"] = seed
        reports = barrier_survey(sset.vectors, land, config.n_pairs, seed, pcfg,
                                 workers=config.workers)
        rel = f"paths/{label}_{landscape_choice}.jsonl"
        lines = [json.dumps(r.to_json_dict(), sort_keys=True) for r in reports]
        (out / rel).write_text("\n".join(lines) + "\n", encoding="utf-8")
        relpaths.append(rel)

        heights = np.array([r.height for r in reports])
        counts, edges = np.histogram(heights, bins=10)
        rel_h = f"histograms/{label}_{landscape_choice}.csv"
        write_csv(out / rel_h, ["bin_left", "bin_right", "count"],
                  [(float(edges[i]), float(edges[i + 1]), int(counts[i]))
                   for i in range(len(counts))])
        relpaths.append(rel_h)
        medians[label] = float(np.median(heights))

    rel_s = f"stats/pathsurvey_{landscape_choice}.json"
    write_json(out / rel_s, {
        "landscape": landscape_choice,
        "subset_size": int(len(subset_idx)),
        "subset_indices": [int(i) for i in subset_idx],
        "n_pairs": config.n_pairs,
        "median_heights": medians,
    })
    relpaths.append(rel_s)

    update_manifest(out, config, seeds, _collect_artifacts(out, relpaths))
    append_run_info(out, f"pathsurvey_{landscape_choice}",
                    {"wall_time_s": time.perf_counter() - t0})
    return medians


# ---------------------------------------------------------------------------
# cmd_analyze
# ---------------------------------------------------------------------------

def cmd_analyze(config, out_dir=None, solutions_dir=None):
    """kPCA projections, shell statistics, and component stats of stored sets."""
    t0 = time.perf_counter()
    out = Path(out_dir or config.output_dir)
    src = Path(solutions_dir) if solutions_dir else out
    (out / "kpca").mkdir(parents=True, exist_ok=True)
    (out / "stats").mkdir(parents=True, exist_ok=True)
    spec = config.spec()
    sets = {label: load_solution_set(src, label, spec) for label in SET_LABELS}
    kind = config.kernel_kind()

    relpaths = []
    # the two standard pairings: training-vs-test and test-vs-test
    for name, (la, lb) in {
        "bfgs_train_vs_sgd_test": ("bfgs_train", "sgd_test"),
        "bfgs_test_vs_sgd_test": ("bfgs_test", "sgd_test"),
    }.items():
        A, B = sets[la], sets[lb]
        points = np.vstack([np.stack(A.vectors), np.stack(B.vectors)])
        model = kpca_fit(points, kind, config.n_components)
        rows = []
        for i, label in enumerate([la] * len(A) + [lb] * len(B)):
            rows.append((label, *[float(s) for s in model.fit_scores[i]]))
        rel = f"kpca/{name}.csv"
        write_csv(out / rel, ["set"] + [f"pc{i+1}" for i in range(config.n_components)],
                  rows)
        relpaths.append(rel)

        stats = shell_stats(np.stack(A.vectors), np.stack(B.vectors))
        rel_j = f"stats/shell_{name}.json"
        write_json(out / rel_j, {
            "set_a": la,
            "set_b": lb,
            **stats.summary(),
        })
        relpaths.append(rel_j)
        rel_d = f"stats/distances_{name}.csv"
        rows = [(la, float(d)) for d in stats.distances_a]
        rows += [(lb, float(d)) for d in stats.distances_b]
        write_csv(out / rel_d, ["set", "distance"], rows)
        relpaths.append(rel_d)

    comp = component_stats({label: sets[label].vectors for label in SET_LABELS})
    rel_c = "stats/component_stats.json"
    write_json(out / rel_c, {label: {"mu": mu, "sigma": sigma}
                             for label, (mu, sigma) in comp.items()})
    relpaths.append(rel_c)

    update_manifest(out, config, {}, _collect_artifacts(out, relpaths))
    append_run_info(out, "analyze", {"wall_time_s": time.perf_counter() - t0})
    return comp


# ---------------------------------------------------------------------------
# cmd_synth
# ---------------------------------------------------------------------------

SYNTH_LAMS = (10.0, 100.0, 1000.0)


def cmd_synth(config=None, out_dir=None):
    """Reproduce the closed-form 2D path experiment (no data files needed)."""
    t0 = time.perf_counter()
    config = config or ExperimentConfig()
    out = Path(out_dir or config.output_dir)
    (out / "synth").mkdir(parents=True, exist_ok=True)
    land = GaussianMixture2D()

    straight = FourierPath(W1, W2, n_fourier=1, n_points=100)
    straight_report = path_loss(straight, land, lam=0.0)
    heights = {"straight": straight_report.height}
    profiles = {"straight": straight_report.point_losses}
    grid = straight.grid
    relpaths = []
    for lam in SYNTH_LAMS:
        pcfg = synthetic_path_config(lam)
        path, report, trace = optimize_synth_path(land, pcfg)
        key = f"lam_{lam:g}"
        heights[key] = report.height
        profiles[key] = report.point_losses
        rel = f"synth/trace_{key}.json"
        write_json(Path(out) / rel, {
            "lam": lam,
            "best_iteration": report.iteration,
            "total_loss": [float(v) for v in trace["total_loss"]],
            "height": [float(v) for v in trace["height"]],
        })
        relpaths.append(rel)

    write_json(out / "synth/heights.json", heights)
    relpaths.append("synth/heights.json")
    header = ["t"] + list(profiles)
    rows = []
    for m in range(len(grid)):
        rows.append((float(grid[m]), *[float(profiles[k][m]) for k in profiles]))
    write_csv(out / "synth/profiles.csv", header, rows)
    relpaths.append("synth/profiles.csv")

    update_manifest(out, config, {}, _collect_artifacts(out, relpaths))
    append_run_info(out, "synth", {"wall_time_s": time.perf_counter() - t0})
    return heights


def optimize_synth_path(land, pcfg):
    """One optimized path between the two published minima of the 2D surface."""
    from .paths import optimize_path
    return optimize_path(W1, W2, land, pcfg)
