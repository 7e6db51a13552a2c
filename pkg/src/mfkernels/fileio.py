"""File formats: measures, kernel specs, samplers, datasets, models,
and study reports.

JSON is written with sorted keys and a fixed indent so repeated runs are
byte-identical; floats go through Python's shortest-round-trip repr, so
every write/read cycle reproduces values exactly. Report files embed the
resolved configuration (when run through the CLI) and its hash.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .basekernels import GaussianKernel, InverseMultiquadricKernel, TableKernel
from .errors import ConfigParseError
from .kernels import (
    DistributionKernel,
    DoubleSumKernel,
    MeanMap,
    MomentsMap,
    PullbackKernel,
    SoftHistogramMap,
)
from .measures import (
    Dirac,
    DiscreteMeasure,
    DomainBox,
    MixtureOfUniforms,
    ParticleConfiguration,
    TruncatedNormal,
    UniformBox,
)
from .meanfield import ConvergenceReport, TransferReport
from .particles import (
    AttractionRepulsion,
    ConstantPotential,
    CoordinateMean,
    Dataset,
    GaussianPotential,
    InteractionEnergy,
    InverseQuadraticPotential,
    PureDiffusion,
    Variance,
    describe_observable,
)
from .rkhs import Expansion


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()[:16]


def _dump(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"{path}: {exc}") from exc


# -- measures and configurations ------------------------------------------


def measure_to_dict(mu: DiscreteMeasure) -> dict:
    return {
        "dim": mu.dim,
        "points": mu.atoms.tolist(),
        "weights": mu.weights.tolist(),
    }


def measure_from_dict(obj: dict) -> DiscreteMeasure:
    try:
        dim = int(obj["dim"])
        points = np.asarray(obj["points"], dtype=float).reshape(-1, dim)
        if obj.get("weights") is None:
            weights = np.full(points.shape[0], 1.0 / points.shape[0])
        else:
            weights = np.asarray(obj["weights"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigParseError(f"bad measure object: {exc}") from exc
    return DiscreteMeasure(points, weights)


def load_measure(path) -> DiscreteMeasure:
    """JSON measure file, or CSV with one point per row (uniform weights)."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        points = np.loadtxt(path, delimiter=",", ndmin=2)
        return measure_from_dict({"dim": points.shape[1], "points": points.tolist()})
    return measure_from_dict(_load_json(path))


def save_measure(mu: DiscreteMeasure, path) -> None:
    _dump(measure_to_dict(mu), path)


def config_to_dict(config: ParticleConfiguration) -> dict:
    return {"dim": config.dim, "points": config.points.tolist()}


def config_from_dict(obj: dict) -> ParticleConfiguration:
    try:
        dim = int(obj["dim"])
        pts = np.asarray(obj["points"], dtype=float).reshape(-1, dim)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigParseError(f"bad configuration object: {exc}") from exc
    return ParticleConfiguration(pts)


# -- kernel specs ----------------------------------------------------------


def base_kernel_to_dict(base) -> dict:
    if isinstance(base, GaussianKernel):
        return {"kind": "gaussian", "gamma": base.gamma}
    if isinstance(base, InverseMultiquadricKernel):
        return {"kind": "inverse_multiquadric", "c": base.c}
    return {"kind": "table", "grid": base.grid.tolist(), "values": base.values.tolist()}


def base_kernel_from_dict(obj: dict):
    kind = obj.get("kind")
    try:
        if kind == "gaussian":
            return GaussianKernel(float(obj["gamma"]))
        if kind == "inverse_multiquadric":
            return InverseMultiquadricKernel(float(obj["c"]))
        if kind == "table":
            return TableKernel(np.asarray(obj["grid"]), np.asarray(obj["values"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigParseError(f"bad base kernel: {exc}") from exc
    raise ConfigParseError(f"unknown base kernel kind {kind!r}")


def feature_map_to_dict(fmap) -> dict:
    if isinstance(fmap, MeanMap):
        return {"kind": "mean"}
    if isinstance(fmap, MomentsMap):
        return {"kind": "moments", "order": fmap.order}
    return {
        "kind": "soft_histogram",
        "grid": fmap.grid.tolist(),
        "bandwidth": fmap.bandwidth,
    }


def feature_map_from_dict(obj: dict):
    kind = obj.get("kind")
    try:
        if kind == "mean":
            return MeanMap()
        if kind == "moments":
            return MomentsMap(int(obj["order"]))
        if kind == "soft_histogram":
            return SoftHistogramMap(np.asarray(obj["grid"]), float(obj["bandwidth"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigParseError(f"bad feature map: {exc}") from exc
    raise ConfigParseError(f"unknown feature map kind {kind!r}")


def kernel_to_dict(kspec: DistributionKernel) -> dict:
    if isinstance(kspec, DoubleSumKernel):
        return {"family": "double_sum", "base": base_kernel_to_dict(kspec.base)}
    return {
        "family": "pullback",
        "base": base_kernel_to_dict(kspec.base),
        "feature_map": feature_map_to_dict(kspec.fmap),
    }


def kernel_from_dict(obj: dict) -> DistributionKernel:
    family = obj.get("family")
    if family == "double_sum":
        return DoubleSumKernel(base_kernel_from_dict(obj.get("base", {})))
    if family == "pullback":
        return PullbackKernel(
            base_kernel_from_dict(obj.get("base", {})),
            feature_map_from_dict(obj.get("feature_map", {"kind": "mean"})),
        )
    raise ConfigParseError(f"unknown kernel family {family!r}")


def load_kernel(path) -> DistributionKernel:
    return kernel_from_dict(_load_json(path))


# -- samplers, observables, dynamics --------------------------------------


def box_from_dict(obj: dict) -> DomainBox:
    try:
        return DomainBox(np.asarray(obj["lower"]), np.asarray(obj["upper"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigParseError(f"bad box: {exc}") from exc


def box_to_dict(box: DomainBox) -> dict:
    return {"lower": box.lower.tolist(), "upper": box.upper.tolist()}


def sampler_to_dict(sampler) -> dict:
    if isinstance(sampler, UniformBox):
        return {"kind": "uniform_box", **box_to_dict(sampler.box)}
    if isinstance(sampler, TruncatedNormal):
        return {
            "kind": "truncated_normal",
            **box_to_dict(sampler.box),
            "loc": sampler.loc.tolist(),
            "scale": sampler.scale.tolist(),
        }
    if isinstance(sampler, MixtureOfUniforms):
        return {
            "kind": "mixture_uniforms",
            "weights": sampler.weights.tolist(),
            "components": [box_to_dict(c.box) for c in sampler.components],
        }
    return {"kind": "dirac", "point": sampler.point.tolist()}


def sampler_from_dict(obj: dict):
    kind = obj.get("kind")
    try:
        if kind == "uniform_box":
            return UniformBox(box_from_dict(obj))
        if kind == "truncated_normal":
            return TruncatedNormal(
                box_from_dict(obj), np.asarray(obj["loc"]), np.asarray(obj["scale"])
            )
        if kind == "mixture_uniforms":
            comps = tuple(UniformBox(box_from_dict(c)) for c in obj["components"])
            return MixtureOfUniforms(comps, np.asarray(obj["weights"]))
        if kind == "dirac":
            return Dirac(np.asarray(obj["point"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigParseError(f"bad sampler: {exc}") from exc
    raise ConfigParseError(f"unknown sampler kind {kind!r}")


def observable_from_dict(obj: dict):
    kind = obj.get("kind")
    if kind == "coordinate_mean":
        return CoordinateMean()
    if kind == "variance":
        return Variance()
    if kind == "interaction_energy":
        pot = obj.get("potential", {})
        pk = pot.get("kind")
        try:
            if pk == "gaussian":
                return InteractionEnergy(GaussianPotential(float(pot["gamma"])))
            if pk == "inverse_quadratic":
                return InteractionEnergy(InverseQuadraticPotential(float(pot["c"])))
            if pk == "constant":
                return InteractionEnergy(ConstantPotential(float(pot["value"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigParseError(f"bad potential: {exc}") from exc
        raise ConfigParseError(f"unknown potential kind {pk!r}")
    raise ConfigParseError(f"unknown observable kind {kind!r}")


observable_to_dict = describe_observable


def dynamics_to_dict(dyn) -> dict:
    if isinstance(dyn, PureDiffusion):
        return {
            "kind": "pure_diffusion",
            "box": box_to_dict(dyn.box),
            "sigma": dyn.sigma,
            "dt": dyn.dt,
        }
    return {
        "kind": "attraction_repulsion",
        "box": box_to_dict(dyn.box),
        "dt": dyn.dt,
        "sigma": dyn.sigma,
        "attraction": dyn.attraction,
        "repulsion": dyn.repulsion,
        "softening": dyn.softening,
    }


def dynamics_from_dict(obj: dict):
    kind = obj.get("kind")
    try:
        if kind == "pure_diffusion":
            return PureDiffusion(
                box_from_dict(obj["box"]), float(obj["sigma"]), float(obj["dt"])
            )
        if kind == "attraction_repulsion":
            return AttractionRepulsion(
                box_from_dict(obj["box"]),
                dt=float(obj["dt"]),
                sigma=float(obj["sigma"]),
                attraction=float(obj.get("attraction", 1.0)),
                repulsion=float(obj.get("repulsion", 0.1)),
                softening=float(obj.get("softening", 1e-2)),
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigParseError(f"bad dynamics: {exc}") from exc
    raise ConfigParseError(f"unknown dynamics kind {kind!r}")


def source_from_dict(obj: dict):
    """A configuration source: sampler or dynamics, keyed by kind."""
    if obj.get("kind") in ("pure_diffusion", "attraction_repulsion"):
        return dynamics_from_dict(obj)
    return sampler_from_dict(obj)


# -- datasets --------------------------------------------------------------


def save_dataset(dataset: Dataset, path) -> None:
    """JSON-lines: a metadata header line, then one record per line."""
    with open(path, "w") as fh:
        fh.write(canonical_json({"kind": "dataset", "metadata": dataset.metadata}))
        fh.write("\n")
        for config, label in dataset.records:
            fh.write(canonical_json({"points": config.points.tolist(), "label": label}))
            fh.write("\n")


def load_dataset(path) -> Dataset:
    with open(path) as fh:
        lines = [line for line in fh.read().splitlines() if line.strip()]
    if not lines:
        raise ConfigParseError(f"{path}: empty dataset file")
    try:
        header = json.loads(lines[0])
        metadata = header["metadata"]
        records = []
        for line in lines[1:]:
            row = json.loads(line)
            config = ParticleConfiguration(np.asarray(row["points"], dtype=float))
            records.append((config, float(row["label"])))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ConfigParseError(f"{path}: bad dataset line: {exc}") from exc
    return Dataset(tuple(records), metadata)


def save_configurations(configs, path, metadata: dict | None = None) -> None:
    """Unlabeled configurations in the dataset format (label null)."""
    meta = {"m": configs[0].m, "dim": configs[0].dim, "n_records": len(configs)}
    meta.update(metadata or {})
    with open(path, "w") as fh:
        fh.write(canonical_json({"kind": "dataset", "metadata": meta}))
        fh.write("\n")
        for config in configs:
            fh.write(canonical_json({"points": config.points.tolist(), "label": None}))
            fh.write("\n")


def load_configurations(path) -> list[ParticleConfiguration]:
    with open(path) as fh:
        lines = [line for line in fh.read().splitlines() if line.strip()]
    out = []
    try:
        for line in lines[1:]:
            row = json.loads(line)
            out.append(ParticleConfiguration(np.asarray(row["points"], dtype=float)))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ConfigParseError(f"{path}: bad configuration line: {exc}") from exc
    if not out:
        raise ConfigParseError(f"{path}: no configurations")
    return out


# -- fitted models ----------------------------------------------------------


def save_model(model: Expansion, path) -> None:
    obj = {
        "kind": "model",
        "kernel": kernel_to_dict(model.kernel),
        "centers": [measure_to_dict(c) for c in model.centers],
        "coefficients": model.coefficients.tolist(),
        "metadata": dict(model.meta or {}),
    }
    _dump(obj, path)


def load_model(path) -> Expansion:
    obj = _load_json(path)
    try:
        kernel = kernel_from_dict(obj["kernel"])
        centers = tuple(measure_from_dict(c) for c in obj["centers"])
        coeffs = np.asarray(obj["coefficients"], dtype=float)
        meta = obj.get("metadata") or None
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigParseError(f"{path}: bad model file: {exc}") from exc
    return Expansion(centers, coeffs, kernel, meta=meta)


# -- reports ----------------------------------------------------------------


def report_to_dict(report) -> dict:
    if isinstance(report, ConvergenceReport):
        body = {
            "kind": "convergence_report",
            "m_grid": list(report.m_grid),
            "medians": list(report.medians),
            "q25": list(report.q25),
            "q75": list(report.q75),
            "slope": report.slope,
            "seeds": list(report.seeds),
            "meta": report.meta,
        }
    elif isinstance(report, TransferReport):
        body = {
            "kind": "transfer_report",
            "train_m": report.train_m,
            "test_m": list(report.test_m),
            "rmse": list(report.rmse),
            "baseline_rmse": list(report.baseline_rmse),
            "lambda": report.lam,
            "n_train": report.n_train,
            "n_test": report.n_test,
            "seed": report.seed,
            "meta": report.meta,
        }
    else:
        raise ConfigParseError(f"unknown report type {type(report).__name__}")
    if "config" in body["meta"]:
        body["config_hash"] = config_hash(body["meta"]["config"])
    return body


def report_from_dict(obj: dict):
    kind = obj.get("kind")
    if kind == "convergence_report":
        return ConvergenceReport(
            tuple(obj["m_grid"]), tuple(obj["medians"]), tuple(obj["q25"]),
            tuple(obj["q75"]), obj["slope"], tuple(obj["seeds"]),
            meta=obj.get("meta", {}),
        )
    if kind == "transfer_report":
        return TransferReport(
            obj["train_m"], tuple(obj["test_m"]), tuple(obj["rmse"]),
            tuple(obj["baseline_rmse"]), obj["lambda"], obj["n_train"],
            obj["n_test"], obj["seed"], meta=obj.get("meta", {}),
        )
    raise ConfigParseError(f"unknown report kind {kind!r}")


def _write_report_csv(report, path) -> None:
    lines = []
    if isinstance(report, ConvergenceReport):
        lines.append("# kind: convergence_report")
        lines.append("# columns: m, median_abs_error, q25_abs_error, q75_abs_error")
        lines.append(f"# slope: {report.slope!r}")
        lines.append("# seeds: " + ",".join(str(s) for s in report.seeds))
        lines.append("# meta: " + canonical_json(report.meta))
        lines.append("m,median_abs_error,q25_abs_error,q75_abs_error")
        for m, med, lo, hi in zip(report.m_grid, report.medians, report.q25, report.q75):
            lines.append(f"{m},{med!r},{lo!r},{hi!r}")
    else:
        lines.append("# kind: transfer_report")
        lines.append("# columns: test_m, rmse, baseline_rmse")
        lines.append(f"# train_m: {report.train_m}")
        lines.append(f"# lambda: {report.lam!r}")
        lines.append(f"# n_train: {report.n_train}")
        lines.append(f"# n_test: {report.n_test}")
        lines.append(f"# seed: {report.seed}")
        lines.append("# meta: " + canonical_json(report.meta))
        lines.append("test_m,rmse,baseline_rmse")
        for m, r, b in zip(report.test_m, report.rmse, report.baseline_rmse):
            lines.append(f"{m},{r!r},{b!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def _read_report_csv(path):
    text = Path(path).read_text().splitlines()
    fields: dict = {}
    rows = []
    for line in text:
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            fields[key] = value
        elif line and not line[0].isalpha():
            rows.append(line.split(","))
    kind = fields.get("kind")
    if kind == "convergence_report":
        cols = list(zip(*rows))
        return ConvergenceReport(
            tuple(int(v) for v in cols[0]),
            tuple(float(v) for v in cols[1]),
            tuple(float(v) for v in cols[2]),
            tuple(float(v) for v in cols[3]),
            float(fields["slope"]),
            tuple(int(s) for s in fields["seeds"].split(",")),
            meta=json.loads(fields["meta"]),
        )
    if kind == "transfer_report":
        cols = list(zip(*rows))
        return TransferReport(
            int(fields["train_m"]),
            tuple(int(v) for v in cols[0]),
            tuple(float(v) for v in cols[1]),
            tuple(float(v) for v in cols[2]),
            float(fields["lambda"]),
            int(fields["n_train"]),
            int(fields["n_test"]),
            int(fields["seed"]),
            meta=json.loads(fields["meta"]),
        )
    raise ConfigParseError(f"{path}: unknown csv report kind {kind!r}")


def write_report(report, path, fmt: str = "json") -> None:
    """Serialize a report; JSON embeds the resolved config hash when the
    meta carries a config."""
    if fmt == "json":
        _dump(report_to_dict(report), path)
    elif fmt == "csv":
        _write_report_csv(report, path)
    else:
        raise ConfigParseError(f"unknown report format {fmt!r}")


def load_report(path):
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return _read_report_csv(path)
    return report_from_dict(_load_json(path))


def write_dat(report, path) -> None:
    """Gnuplot-compatible columns (M, median, q25, q75) for convergence
    reports; (test_m, rmse, baseline) for transfer reports."""
    lines = []
    if isinstance(report, ConvergenceReport):
        lines.append("# M median q25 q75")
        for m, med, lo, hi in zip(report.m_grid, report.medians, report.q25, report.q75):
            lines.append(f"{m} {med!r} {lo!r} {hi!r}")
    else:
        lines.append("# test_m rmse baseline_rmse")
        for m, r, b in zip(report.test_m, report.rmse, report.baseline_rmse):
            lines.append(f"{m} {r!r} {b!r}")
    Path(path).write_text("\n".join(lines) + "\n")
