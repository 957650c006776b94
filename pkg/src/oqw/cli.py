"""Command-line front end.

    oqw <mode> --config FILE [--out DIR] [--seed N] [--override key=value ...]

Modes: derive, discrete, continuous, trajectories, analyze.  The config is a
YAML (or JSON) mapping; unknown keys are fatal.  Every output file begins with
a header carrying a hash of the resolved config.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field, fields, asdict
from pathlib import Path

import numpy as np
import yaml

from . import presets
from .continuous import SCHEMES, IntegratorConfig, integrate
from .discrete import TransitionTable, WalkState, normalization_defects, run
from .graph import WalkGraph, make_chain, make_circle, make_custom
from .microscopic import (BathSpec, LOOP_FORMS, MicroscopicModel, build_generator, discretize,
                          eigen_decompose_coins)
from .observables import analytic_rates, fit_asymptotic_slope, moments_from_snapshots
from .trajectories import run_ensemble, run_trajectory

log = logging.getLogger("oqw")

MODES = ("derive", "discrete", "continuous", "trajectories", "analyze")


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key
        self.message = message


@dataclass
class RunConfig:
    model: object = None  # preset name or inline model mapping
    mode: str = None
    params: dict = field(default_factory=dict)  # preset parameter overrides
    table: object = None  # inline transition table (mapping or path to derive JSON)
    initial: dict = None  # {node, rho} or {node, state}
    delta: float = None
    loop_form: str = None
    n_steps: int = 5000
    t_final: float = None
    dt: float = 0.05
    scheme: str = "rk4"
    record_every: int = 10
    n_traj: int = 100
    trajectory_files: int = 1
    seed: int = 0
    unwrap: bool = None
    input: str = None  # analyze: moments CSV
    window_fraction: float = 0.5
    out_dir: str = "out"


# ---------------------------------------------------------------- matrices


def encode_matrix(a) -> list:
    a = np.asarray(a, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def decode_matrix(obj, key: str) -> np.ndarray:
    try:
        rows = []
        for row in obj:
            out = []
            for z in row:
                if isinstance(z, (list, tuple)):
                    re, im = z
                    out.append(complex(float(re), float(im)))
                else:
                    out.append(complex(float(z)))
            rows.append(out)
        a = np.array(rows, dtype=complex)
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, f"not a matrix of [re, im] pairs ({exc})")
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ConfigError(key, f"matrix must be square, got shape {a.shape}")
    return a


def _check_keys(d: dict, allowed, prefix: str):
    if not isinstance(d, dict):
        raise ConfigError(prefix, "expected a mapping")
    for k in d:
        if k not in allowed:
            raise ConfigError(f"{prefix}.{k}" if prefix else k, "unknown key")


def _graph_from(d: dict, key: str) -> WalkGraph:
    _check_keys(d, {"topology", "M", "edges"}, key)
    topo = d.get("topology", "custom")
    M = d.get("M")
    if not isinstance(M, int) or M < 1:
        raise ConfigError(f"{key}.M", "must be a positive integer")
    if topo == "circle":
        return make_circle(M)
    if topo == "chain":
        return make_chain(M)
    if topo == "custom":
        return make_custom(M, [tuple(e) for e in d.get("edges", [])])
    raise ConfigError(f"{key}.topology", f"unknown topology {topo!r}")


def _graph_to(g: WalkGraph) -> dict:
    out = {"topology": g.topology_tag, "M": g.node_count}
    if g.topology_tag == "custom":
        out["edges"] = [list(e) for e in g.sorted_edges()]
    return out


def model_from_dict(d: dict) -> MicroscopicModel:
    _check_keys(d, {"graph", "omega", "coins", "bath", "hamiltonians"}, "model")
    for k in ("graph", "omega", "coins", "bath"):
        if k not in d:
            raise ConfigError(f"model.{k}", "missing")
    g = _graph_from(d["graph"], "model.graph")
    om = d["omega"]
    if isinstance(om, list) and om and isinstance(om[0], dict):
        raise ConfigError("model.omega", "give one matrix or a list of M matrices")
    try:
        single = decode_matrix(om, "model.omega")
        omega = tuple(single for _ in g.nodes)
    except ConfigError:
        if len(om) != g.node_count:
            raise ConfigError("model.omega", f"expected one matrix or {g.node_count} matrices")
        omega = tuple(decode_matrix(m, f"model.omega[{i}]") for i, m in enumerate(om))
    coins = {}
    for k, c in enumerate(d["coins"]):
        _check_keys(c, {"src", "dst", "op"}, f"model.coins[{k}]")
        coins[(int(c["src"]), int(c["dst"]))] = decode_matrix(c["op"], f"model.coins[{k}].op")
    b = d["bath"]
    _check_keys(b, {"mean_photon_number", "inv_temperature", "gamma_se", "reference_frequency"}, "model.bath")
    if "gamma_se" not in b:
        raise ConfigError("model.bath.gamma_se", "missing")
    if "mean_photon_number" in b:
        if "reference_frequency" not in b:
            raise ConfigError("model.bath.reference_frequency", "required with mean_photon_number")
        bath = BathSpec.from_mean_photon_number(float(b["mean_photon_number"]),
                                                float(b["reference_frequency"]), float(b["gamma_se"]))
    elif "inv_temperature" in b:
        bath = BathSpec(float(b["inv_temperature"]), float(b["gamma_se"]), b.get("reference_frequency"))
    else:
        raise ConfigError("model.bath", "give mean_photon_number or inv_temperature")
    hams = {}
    h = d.get("hamiltonians")
    if isinstance(h, dict):
        hams = {int(i): decode_matrix(m, f"model.hamiltonians.{i}") for i, m in h.items()}
    elif h is not None:
        hm = decode_matrix(h, "model.hamiltonians")
        hams = {i: hm for i in g.nodes}
    return MicroscopicModel(g, omega, coins, bath, hams)


def table_to_dict(t: TransitionTable) -> dict:
    defects = normalization_defects(t)
    return {
        "dim": t.dim,
        "graph": _graph_to(t.graph),
        "delta": t.meta.get("delta"),
        "loop_form": t.meta.get("loop_form"),
        "loops": [{"node": j, "op": encode_matrix(t.loop_ops[j])} for j in sorted(t.loop_ops)],
        "edges": [{"src": j, "dst": i, "ops": [encode_matrix(o) for o in t.edge_ops[(j, i)]]}
                  for j, i in sorted(t.edge_ops)],
        "normalization_defects": {str(j): d for j, d in defects.items()},
        "max_defect": max(defects.values()),
    }


def table_from_dict(d: dict) -> TransitionTable:
    _check_keys(d, {"#", "dim", "graph", "delta", "loop_form", "loops", "edges",
                    "normalization_defects", "max_defect"}, "table")
    g = _graph_from(d["graph"], "table.graph")
    loops = {int(e["node"]): decode_matrix(e["op"], f"table.loops.{e['node']}") for e in d["loops"]}
    edges = {(int(e["src"]), int(e["dst"])): tuple(decode_matrix(o, f"table.edges.{e['src']}->{e['dst']}")
                                                   for o in e["ops"]) for e in d["edges"]}
    meta = {"delta": d.get("delta") if d.get("delta") is not None else 1.0, "loop_form": d.get("loop_form")}
    return TransitionTable(int(d["dim"]), g, edges, loops, meta=meta)


# ---------------------------------------------------------------- config


def _set_dotted(d: dict, key: str, value):
    parts = key.split(".")
    cur = d
    for p in parts[:-1]:
        cur = cur.setdefault(p, {})
        if not isinstance(cur, dict):
            raise ConfigError(key, "cannot override inside a non-mapping")
    cur[parts[-1]] = value


def parse_config(raw, overrides=()) -> RunConfig:
    """Validate a config mapping (or YAML text) into a RunConfig."""
    if isinstance(raw, str):
        raw = yaml.safe_load(raw)
    raw = dict(raw or {})
    for ov in overrides:
        if "=" not in ov:
            raise ConfigError(ov, "override must look like key=value")
        k, v = ov.split("=", 1)
        _set_dotted(raw, k.strip(), yaml.safe_load(v))
    names = {f.name for f in fields(RunConfig)}
    for k in raw:
        if k not in names:
            raise ConfigError(k, "unknown key")
    cfg = RunConfig(**raw)
    _validate(cfg)
    return cfg


def _int(cfg, name, lo):
    v = getattr(cfg, name)
    if isinstance(v, bool) or not isinstance(v, int) or v < lo:
        raise ConfigError(name, f"must be an integer >= {lo}, got {v!r}")


def _pos(cfg, name, allow_none=False, allow_zero=False):
    v = getattr(cfg, name)
    if v is None and allow_none:
        return
    if isinstance(v, bool) or not isinstance(v, (int, float)) or v < 0 or (v == 0 and not allow_zero):
        raise ConfigError(name, f"must be a {'non-negative' if allow_zero else 'positive'} number, got {v!r}")


def _validate(cfg: RunConfig):
    if cfg.mode not in MODES:
        raise ConfigError("mode", f"must be one of {MODES}, got {cfg.mode!r}")
    if cfg.model is None and cfg.table is None:
        raise ConfigError("model", "missing (preset name or inline model)")
    if isinstance(cfg.model, str) and cfg.model not in presets.PRESETS:
        raise ConfigError("model", f"unknown preset {cfg.model!r}; choose from {sorted(presets.PRESETS)}")
    if cfg.model is not None and not isinstance(cfg.model, (str, dict)):
        raise ConfigError("model", "must be a preset name or a mapping")
    if cfg.params and not isinstance(cfg.model, str):
        raise ConfigError("params", "only valid with a preset model")
    _int(cfg, "n_steps", 0)
    _int(cfg, "record_every", 1)
    _int(cfg, "n_traj", 1)
    _int(cfg, "trajectory_files", 0)
    _int(cfg, "seed", 0)
    _pos(cfg, "dt")
    _pos(cfg, "t_final", allow_none=True, allow_zero=True)
    _pos(cfg, "delta", allow_none=True)
    if cfg.scheme not in SCHEMES:
        raise ConfigError("scheme", f"must be one of {SCHEMES}")
    if cfg.loop_form is not None and cfg.loop_form not in LOOP_FORMS:
        raise ConfigError("loop_form", f"must be one of {LOOP_FORMS}")
    if not 0 < float(cfg.window_fraction) <= 1:
        raise ConfigError("window_fraction", "must be in (0, 1]")
    if isinstance(cfg.model, str):
        try:
            presets.make_params(cfg.model, cfg.params)
        except KeyError as exc:
            raise ConfigError("params", str(exc.args[0]))
        except ValueError as exc:
            raise ConfigError("params", str(exc))


@dataclass
class Resolved:
    cfg: RunConfig
    params: object = None
    model: MicroscopicModel = None
    table_src: dict = None
    delta: float = None
    loop_form: str = None
    start_node: int = None
    rho0: np.ndarray = None
    graph: WalkGraph = None

    def as_dict(self) -> dict:
        d = asdict(self.cfg)
        if self.params is not None:
            d["params"] = presets.params_dict(self.params)
        d["delta"] = self.delta
        d["loop_form"] = self.loop_form
        if self.cfg.mode == "continuous" and d["t_final"] is None and self.delta is not None:
            d["t_final"] = self.cfg.n_steps * self.delta
        d["initial"] = None if self.start_node is None else {
            "node": self.start_node, "rho": encode_matrix(self.rho0)}
        return d

    def hash(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def resolve(cfg: RunConfig) -> Resolved:
    r = Resolved(cfg)
    if isinstance(cfg.model, str):
        r.params = presets.make_params(cfg.model, cfg.params)
        r.model = presets.PRESETS[cfg.model].model(r.params)
        r.delta = r.params.delta if cfg.delta is None else float(cfg.delta)
        r.loop_form = cfg.loop_form or r.params.loop_form
        r.start_node = r.params.start_node
        r.rho0 = presets.INITIAL_STATES[r.params.initial]
        r.graph = r.model.graph
    elif isinstance(cfg.model, dict):
        r.model = model_from_dict(cfg.model)
        r.graph = r.model.graph
        r.delta = cfg.delta
        r.loop_form = cfg.loop_form or "exact"
    if cfg.table is not None:
        src = cfg.table
        if isinstance(src, str):
            try:
                src = json.loads(Path(src).read_text())
            except (OSError, ValueError) as exc:
                raise ConfigError("table", f"cannot read {cfg.table!r}: {exc}")
        r.table_src = src
        tab = table_from_dict(src)
        r.graph = tab.graph
        if r.delta is None:
            r.delta = tab.meta["delta"]
        r.loop_form = r.loop_form or tab.meta.get("loop_form")
    if cfg.initial is not None:
        _check_keys(cfg.initial, {"node", "rho", "state"}, "initial")
        node = cfg.initial.get("node")
        if not isinstance(node, int) or not 1 <= node <= r.graph.node_count:
            raise ConfigError("initial.node", f"must be an integer in 1..{r.graph.node_count}")
        r.start_node = node
        if "rho" in cfg.initial:
            r.rho0 = decode_matrix(cfg.initial["rho"], "initial.rho")
        elif cfg.initial.get("state") in presets.INITIAL_STATES:
            r.rho0 = presets.INITIAL_STATES[cfg.initial["state"]]
        else:
            raise ConfigError("initial.state", f"choose from {sorted(presets.INITIAL_STATES)} or give rho")
    if cfg.mode in ("discrete", "trajectories", "derive") and r.delta is None:
        raise ConfigError("delta", "required for inline models")
    if cfg.mode in ("discrete", "continuous", "trajectories") and r.start_node is None:
        raise ConfigError("initial", "required for inline models")
    if cfg.mode == "continuous" and r.model is None:
        raise ConfigError("mode", "continuous runs need a model, not just a table")
    if cfg.mode == "continuous" and cfg.t_final is None and r.delta is None:
        raise ConfigError("t_final", "required when no delta is available")
    return r


# ---------------------------------------------------------------- output


def fmt(x) -> str:
    return format(float(x), ".17g")


class Writer:
    def __init__(self, out_dir: Path, config_hash: str):
        self.out = out_dir
        self.hash = config_hash
        self.out.mkdir(parents=True, exist_ok=True)
        self.written = []

    def header(self) -> str:
        return f"# oqw config_hash={self.hash}\n"

    def csv(self, name: str, columns, rows):
        path = self.out / name
        with open(path, "w", newline="") as fh:
            fh.write(self.header())
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow(row)
        self.written.append(path)
        return path

    def json(self, name: str, obj: dict):
        path = self.out / name
        payload = {"#": f"oqw config_hash={self.hash}"}
        payload.update(obj)
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1)
            fh.write("\n")
        self.written.append(path)
        return path

    def text(self, name: str, body: str):
        path = self.out / name
        path.write_text(self.header() + body)
        self.written.append(path)
        return path


def _entry_cols(n: int) -> list[str]:
    return [f"{p}_{i}{j}" for i in range(n) for j in range(n) for p in ("re", "im")]


def _entries(rho) -> list[str]:
    out = []
    for z in np.asarray(rho).reshape(-1):
        out += [fmt(z.real), fmt(z.imag)]
    return out


def snapshot_rows(snaps):
    for s in snaps:
        for i in range(s.node_count):
            b = s.blocks[i]
            yield [s.step, fmt(s.time), i + 1, fmt(np.trace(b).real)] + _entries(b)


def write_snapshots(w: Writer, snaps, name="snapshots.csv"):
    n = snaps[0].dim
    return w.csv(name, ["step", "time", "node", "trace"] + _entry_cols(n), snapshot_rows(snaps))


def write_moments(w: Writer, ms, name="moments.csv"):
    M = ms.occupation.shape[1]
    cols = ["t", "mu", "var", "coherence_x", "wrapped"] + [f"P_{i}" for i in range(1, M + 1)]
    rows = ([fmt(ms.times[k]), fmt(ms.mu[k]), fmt(ms.var[k]), fmt(ms.coherence_x[k]), int(ms.wrapped[k])]
            + [fmt(x) for x in ms.occupation[k]] for k in range(len(ms)))
    return w.csv(name, cols, rows)


def read_moments(path) -> dict:
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    head, data = rows[0], np.array(rows[1:], dtype=float)
    return {c: data[:, k] for k, c in enumerate(head)}


# ---------------------------------------------------------------- dispatch


def _table(r: Resolved) -> TransitionTable:
    if r.table_src is not None:
        return table_from_dict(r.table_src)
    g = build_generator(r.model, eigen_decompose_coins(r.model))
    return discretize(g, r.delta, r.loop_form)


def _unwrap(r: Resolved):
    use = r.cfg.unwrap if r.cfg.unwrap is not None else r.graph.topology_tag == "circle"
    return r.start_node if use else None


def dispatch(cfg: RunConfig, out_dir=None) -> list[Path]:
    r = resolve(cfg)
    w = Writer(Path(out_dir or cfg.out_dir), r.hash())
    w.text("resolved-config.yaml", yaml.safe_dump(r.as_dict(), sort_keys=True))
    mode = cfg.mode
    if mode == "derive":
        t = _table(r)
        w.json("table.json", table_to_dict(t))
    elif mode == "discrete":
        t = _table(r)
        s0 = WalkState.localized(r.graph.node_count, r.start_node, r.rho0)
        snaps = run(t, s0, cfg.n_steps, cfg.record_every)
        write_snapshots(w, snaps)
        write_moments(w, moments_from_snapshots(snaps, _unwrap(r)))
    elif mode == "continuous":
        g = build_generator(r.model, eigen_decompose_coins(r.model))
        t_final = cfg.t_final if cfg.t_final is not None else cfg.n_steps * r.delta
        ic = IntegratorConfig(float(cfg.dt), float(t_final), cfg.scheme, cfg.record_every)
        s0 = WalkState.localized(r.graph.node_count, r.start_node, r.rho0)
        snaps = integrate(g, s0, ic)
        write_snapshots(w, snaps)
        write_moments(w, moments_from_snapshots(snaps, _unwrap(r)))
    elif mode == "trajectories":
        t = _table(r)
        n = t.dim
        for k in range(min(cfg.trajectory_files, cfg.n_traj)):
            rec = run_trajectory(t, r.start_node, r.rho0, cfg.n_steps, cfg.seed + k)
            rows = ([st, node, lab, fmt(np.trace(rho).real)] + _entries(rho) for st, node, lab, rho in rec.rows())
            w.csv(f"trajectory_{cfg.seed + k}.csv", ["step", "node", "label", "trace"] + _entry_cols(n), rows)
        ens = run_ensemble(t, r.start_node, r.rho0, cfg.n_steps, cfg.n_traj, cfg.seed, cfg.record_every)
        M = t.graph.node_count
        w.csv("ensemble.csv", ["step", "node", "count"],
              ([int(st), i + 1, int(ens.counts[k, i])] for k, st in enumerate(ens.steps) for i in range(M)
               if ens.counts[k, i]))
        w.csv("ensemble_moments.csv", ["step", "mean", "var"],
              ([int(st), fmt(ens.mean[k]), fmt(ens.var[k])] for k, st in enumerate(ens.steps)))
    elif mode == "analyze":
        report = {}
        if isinstance(r.params, presets.CircleExampleParams):
            p = r.params
            report["rates"] = analytic_rates(p.gamma_se, p.lambda_field, p.n_mean).to_dict()
        if cfg.input:
            try:
                m = read_moments(cfg.input)
            except (OSError, ValueError, IndexError) as exc:
                raise ConfigError("input", f"cannot read moments CSV: {exc}")
            ok = m["wrapped"] == 0 if "wrapped" in m else np.ones(len(m["t"]), dtype=bool)
            fits = {}
            for name, key in (("v_mu", "mu"), ("v_sigma2", "var")):
                fits[name] = fit_asymptotic_slope(np.column_stack([m["t"][ok], m[key][ok]]),
                                                  float(cfg.window_fraction))
            fits["points_used"] = int(ok.sum())
            fits["window_fraction"] = float(cfg.window_fraction)
            report["fits"] = fits
            if "rates" in report:
                rates = report["rates"]
                report["relative_error"] = {
                    "v_mu": fits["v_mu"] / rates["v_mu"] - 1,
                    "v_sigma2": fits["v_sigma2"] / rates["v_sigma2"] - 1,
                    "v_sigma2_exact": fits["v_sigma2"] / rates["v_sigma2_exact"] - 1,
                }
        if not report:
            raise ConfigError("input", "analyze needs a circle-example model or a moments CSV input")
        w.json("rates.json", report)
    return w.written


def _error_line(mode, model, key, msg) -> str:
    model_name = model if isinstance(model, str) or model is None else "inline"
    msg = " ".join(str(msg).split())
    return f"oqw: error mode={mode} model={model_name} key={key} message={json.dumps(msg)}"


def load_config_file(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path!r}: {exc.strerror}")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("config", f"malformed document: {exc}")
    if data is not None and not isinstance(data, dict):
        raise ConfigError("config", "top level must be a mapping")
    return data or {}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="oqw", description="Open quantum walk simulator")
    ap.add_argument("mode", choices=MODES)
    ap.add_argument("--config", required=True, help="YAML or JSON config file")
    ap.add_argument("--out", default=None, help="output directory (overrides out_dir)")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                    help="set a config key; dotted keys reach into params, e.g. params.n_mean=5")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    raw = {}
    try:
        raw = load_config_file(args.config)
        if raw.get("mode") not in (None, args.mode):
            raise ConfigError("mode", f"config says {raw['mode']!r} but command line says {args.mode!r}")
        raw["mode"] = args.mode
        if args.seed is not None:
            raw["seed"] = args.seed
        cfg = parse_config(raw, args.override)
        written = dispatch(cfg, args.out)
    except ConfigError as exc:
        print(_error_line(args.mode, raw.get("model"), exc.key, exc.message), file=sys.stderr)
        return 2
    except Exception as exc:  # engine errors: report with context
        print(_error_line(args.mode, raw.get("model"), type(exc).__name__, exc), file=sys.stderr)
        return 1
    for p in written:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
