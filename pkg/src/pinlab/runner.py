"""Config-driven experiment runs with reproducibility manifests."""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io
import json
import logging
import os
import tempfile
import warnings
from dataclasses import asdict, dataclass, field, fields
from importlib import metadata

import numpy as np
import yaml

from . import disorder as D
from . import estimators as E
from . import verification as V
from .errors import ConfigError, PinlabError, ValidationError
from .renewal import law_from_dict

COMMANDS = ("free-energy", "mu", "derivatives", "centering", "gap", "clt", "decay", "verify", "sample-disorder")
EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_VALIDATION, EXIT_IO = 0, 1, 2, 3, 4

DEFAULT_LAW = {"alpha": 0.5, "ell": {"kind": "constant", "c": 1.0}, "horizon": 10**7, "n_max": 8192}


@dataclass
class ExperimentConfig:
    command: str
    seed: int
    law: dict = field(default_factory=lambda: dict(DEFAULT_LAW))
    spec: dict = field(default_factory=lambda: {"family": "iid", "sigma2": 1.0})
    h: float | None = None
    h_grid: list | None = None
    n: int | None = None
    n_list: list | None = None
    replicas: int = 50
    paths: int = 200
    output_dir: str = "out"
    approximate_cutoff: int | None = None
    order: int = 2
    suite: str = "quick"

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("config must be a mapping")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "seed" not in d or d["seed"] is None:
            raise ConfigError("config needs an explicit seed")
        if "command" not in d:
            raise ConfigError("config needs a command")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def validate(self):
        if self.command not in COMMANDS:
            raise ValidationError("command", f"must be one of {COMMANDS}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ValidationError("seed", "must be an integer in [0, 2^64)")
        if self.replicas < 1:
            raise ValidationError("replicas", "must be >= 1")
        for key in ("law", "spec"):
            if not isinstance(getattr(self, key), dict):
                raise ValidationError(key, "must be a mapping")
        if self.approximate_cutoff is not None and self.approximate_cutoff < 1:
            raise ValidationError("approximate_cutoff", "must be a positive integer")

    def hs(self):
        if self.h_grid is not None:
            return [float(h) for h in self.h_grid]
        if self.h is None:
            raise ValidationError("h", "h or h_grid is required")
        return [float(self.h)]

    def ns(self):
        if self.n_list is not None:
            return [int(n) for n in self.n_list]
        if self.n is None:
            raise ValidationError("n", "n or n_list is required")
        return [int(self.n)]


def load_config_dict(path):
    """Raw mapping from a YAML config file, not yet validated."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def load_config(path):
    return ExperimentConfig.from_dict(load_config_dict(path))


def dump_config(cfg):
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True)


# ------------------------------------------------------------------ outputs


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def records_to_csv(records):
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(E.CSV_FIELDS)
    for r in records:
        wr.writerow([_fmt(v) for v in r.row()])
    return buf.getvalue()


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        out.append(E.EstimateRecord(r["name"], float(r["h"]), int(r["n"]), int(r["replicas"]),
                                    float(r["point"]), float(r["std_error"]), r["method"], int(r["seed"])))
    return out


def _atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_csv(records, path):
    _atomic_write(path, records_to_csv(records))
    return path


def emit_manifest(manifest, path):
    _atomic_write(path, json.dumps(V._plain(manifest), sort_keys=True, indent=2) + "\n")
    return path


def _digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


class _EventLog(logging.Handler):
    def __init__(self):
        super().__init__(logging.WARNING)
        self.events = []

    def emit(self, record):
        self.events.append(record.getMessage())


# ------------------------------------------------------------------ suites


def verify_suite(name, law, seed):
    """(label, callable) pairs for the named verification suite."""
    iid, exp, pw = D.IID(1.0), D.ExpDecay(1.0, 0.5), D.PowerLaw(1.0, 0.2, 0.5)
    if name == "quick":
        return [
            ("comparison_lemma", lambda: V.check_comparison_lemma(law, 1.0, 8, exp, 3, 20_000, seed)),
            ("endpoint_decay", lambda: V.check_endpoint_decay(law, iid, 2.0, [32, 64, 128, 256], 100, seed)),
            ("gibbs_decay", lambda: V.check_gibbs_decay(law, iid, 1.5, 128, 20, seed, lags=range(2, 21, 2))),
            ("replica_decoupling", lambda: V.check_replica_decoupling(law, iid, 1.5, [16, 32, 64], 10, 20, seed)),
            ("concentration", lambda: V.check_concentration(law, iid, 1.0, 64, 2000, seed)),
            ("hypercontractivity", lambda: V.check_hypercontractivity(exp, 32, 4, 50_000, seed)),
            ("mu_sandwich", lambda: V.check_mu_sandwich(law, iid, [1.0, 2.0], 256, 100, seed)),
            ("convolution_decay", lambda: V.check_convolution_decay(0.5, 0.5, 0.4, 10**4)),
        ]
    if name == "acceptance":
        return [
            ("comparison_lemma", lambda: V.check_comparison_lemma(law, 1.0, 10, exp, 3, 10**6, seed)),
            *[(f"gibbs_decay[{s.family}]", (lambda s=s: V.check_gibbs_decay(law, s, 1.5, 512, 200, seed)))
              for s in (iid, exp, pw)],
            ("endpoint_decay", lambda: V.check_endpoint_decay(law, iid, 2.0, [64, 128, 256, 512], 500, seed)),
            *[(f"largest_gap[{s.family}]",
               (lambda s=s: V.check_largest_gap(law, s, 1.5, [1024, 2048, 4096, 8192], 200, 200, seed)))
              for s in (iid, exp)],
            *[(f"clt[{s.family}]", (lambda s=s: V.check_clt(law, s, 1.5, 4096, 10, 10**4, seed)))
              for s in (iid, exp)],
            *[(f"concentration[{s.family}]", (lambda s=s: V.check_concentration(law, s, 1.0, 256, 10**4, seed)))
              for s in (iid, exp, pw)],
            ("mu_sandwich", lambda: V.check_mu_sandwich(law, iid, [0.5, 1.0, 1.5, 2.0], 1024, 500, seed)),
            *[(f"hypercontractivity[{s.family}]", (lambda s=s: V.check_hypercontractivity(s, 64, 4, 10**6, seed)))
              for s in (iid, exp)],
            ("convolution_decay", lambda: V.check_convolution_decay(0.5, 0.5, 0.4, 10**4)),
        ]
    raise ValidationError("suite", f"unknown suite {name!r} (quick, acceptance)")


# ------------------------------------------------------------------ run


def _write_reports(reports, out):
    paths = []
    for label, rep in reports:
        p = os.path.join(out, f"{label.replace('[', '_').replace(']', '')}.json")
        _atomic_write(p, rep.to_json() + "\n")
        paths.append(p)
    return paths


def _execute(cfg, law, spec, out):
    """Run the command; returns (output paths, all checks passed)."""
    seed, cut = cfg.seed, cfg.approximate_cutoff
    csv_path = os.path.join(out, "results.csv")
    c = cfg.command
    if c == "free-energy":
        recs = []
        for n in cfg.ns():
            recs += E.free_energy_curve(law, spec, cfg.hs(), n, cfg.replicas, seed, cut)
        return [emit_csv(recs, csv_path)], True
    if c == "mu":
        recs = []
        for n in cfg.ns():
            recs += E.mu_curve(law, spec, cfg.hs(), n, cfg.replicas, seed, cut)
        return [emit_csv(recs, csv_path)], True
    if c == "derivatives":
        recs = []
        for n in cfg.ns():
            for h in cfg.hs():
                recs += E.free_energy_derivatives(law, spec, h, n, cfg.replicas, cfg.order, seed, t_max=cut)
        return [emit_csv(recs, csv_path)], True
    if c == "centering":
        recs = []
        for n in cfg.ns():
            for h in cfg.hs():
                recs += list(E.centering_statistics(law, spec, h, n, cfg.replicas, seed, cut))
        return [emit_csv(recs, csv_path)], True
    if c == "gap":
        rep = V.check_largest_gap(law, spec, cfg.hs()[0], cfg.ns(), cfg.replicas, cfg.paths, seed, t_max=cut)
        return _write_reports([("largest_gap", rep)], out), rep.passed
    if c == "clt":
        rep = V.check_clt(law, spec, cfg.hs()[0], cfg.ns()[-1], cfg.replicas, cfg.paths, seed)
        return _write_reports([("clt", rep)], out), rep.passed
    if c == "decay":
        reps = [("gibbs_decay", V.check_gibbs_decay(law, spec, cfg.hs()[0], cfg.ns()[-1], cfg.replicas, seed))]
        if len(cfg.ns()) >= 4:
            reps.append(("endpoint_decay", V.check_endpoint_decay(law, spec, cfg.hs()[0], cfg.ns(), cfg.replicas, seed)))
        return _write_reports(reps, out), all(r.passed for _, r in reps)
    if c == "verify":
        reps = [(label, fn()) for label, fn in verify_suite(cfg.suite, law, seed)]
        paths = _write_reports(reps, out)
        summary = {label: rep.passed for label, rep in reps}
        p = os.path.join(out, "summary.json")
        _atomic_write(p, json.dumps(summary, sort_keys=True, indent=2) + "\n")
        return paths + [p], all(summary.values())
    if c == "sample-disorder":
        paths = []
        for n in cfg.ns():
            for i in range(cfg.replicas):
                s = D.sample(spec, n, D.replica_seed(seed, i))
                p = os.path.join(out, f"disorder_n{n}_r{i}.bin")
                D.dump_sample(s, p)
                paths.append(p)
        return paths, True
    raise ValidationError("command", f"unknown command {c!r}")


def run(cfg):
    """Execute a validated config; returns (exit code, manifest dict)."""
    start = _dt.datetime.now(_dt.timezone.utc).isoformat()
    try:
        law = law_from_dict(cfg.law)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError("law", str(exc)) from exc
    try:
        spec = D.spec_from_dict(cfg.spec)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError("spec", str(exc)) from exc
    out = cfg.output_dir
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    handler = _EventLog()
    logging.getLogger("pinlab").addHandler(handler)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", E.LowESSWarning)
            paths, passed = _execute(cfg, law, spec, out)
    finally:
        logging.getLogger("pinlab").removeHandler(handler)
    manifest = {
        "config": cfg.to_dict(),
        "tool_version": _version(),
        "start": start,
        "end": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "seeds": {"base": cfg.seed, "replica_rule": "base + replica_index mod 2^64"},
        "normalization_error": law.normalization_error,
        "tail_mass": law.tail_mass,
        "fallback_events": handler.events,
        "warnings": [str(w.message) for w in caught],
        "approximate": cfg.approximate_cutoff is not None,
        "outputs": {os.path.basename(p): _digest(p) for p in paths},
        "passed": passed,
    }
    emit_manifest(manifest, os.path.join(out, "manifest.json"))
    return (EXIT_OK if passed else EXIT_FAILED), manifest


def run_safely(cfg):
    """run() with exceptions mapped onto exit codes."""
    try:
        return run(cfg)[0]
    except ValidationError as exc:
        logging.getLogger("pinlab").error("validation error: %s", exc)
        return EXIT_VALIDATION
    except ConfigError as exc:
        logging.getLogger("pinlab").error("config error: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        logging.getLogger("pinlab").error("io error: %s", exc)
        return EXIT_IO
    except PinlabError as exc:
        logging.getLogger("pinlab").error("%s: %s", type(exc).__name__, exc)
        return EXIT_VALIDATION
