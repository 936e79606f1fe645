"""Command line driver running the verification suites and emitting reports.

Every suite produces case records {suite, case_id, inputs, status, details}
with status pass, fail or reported.  Records are sorted by case id and all
values are integers, booleans or strings, so a report is byte-identical on
re-run with the same configuration.
"""

import argparse
import json
import os
import random
import sys

from gmpy2 import mpq

from . import __version__
from .adjoint import adjoint_pairings, frame_pairings, weitzenbock_check
from .curvature import (
    check_traces,
    decompose_curvature,
    decomposition_ok,
    qk_curvature,
    random_decomposition,
    reconstruct_curvature,
    ricci_scalar,
)
from .curved import (
    composition_law,
    conformal_check,
    flat_model,
    random_conformal_factor,
    sample_connection,
    verify_curved_complex,
)
from .errors import ConfigError, IoError, KComplexError, NoPreimage, NotInKernel
from .field import ONE, serialize
from .flat import regular_example, torus_cohomology, verify_flat_complex
from .covariant import FlatGeometry, apply_D
from .frames import tau_sweep
from .symbols import ComplexSpec, XiMatrix, exactness_check, theta_preimage

OUT_DIR_ENV = "KCOMPLEX_OUT_DIR"

SUITES = (
    "dims",
    "symbol-check",
    "flat-check",
    "torus-cohomology",
    "curvature-roundtrip",
    "curved-check",
    "conformal-check",
    "weitzenbock-check",
)

# per-suite defaults used when --n / --k are not given
DEFAULT_NS = {
    "dims": [1, 2, 3],
    "symbol-check": [1, 2, 3],
    "flat-check": [1, 2, 3],
    "torus-cohomology": [2],
    "curvature-roundtrip": [2, 3],
    "curved-check": [2, 3],
    "conformal-check": [2, 3],
    "weitzenbock-check": [2],
}
DEFAULT_KS = {
    "dims": [0, 1, 2, 3, 4],
    "symbol-check": [0, 1, 2, 3, 4],
    "flat-check": [0, 1, 2, 3],
    "torus-cohomology": [0, 1, 2],
    "curved-check": [0, 1, 2, 3],
    "conformal-check": [0, 1, 2, 3],
}
MIN_N = {"curved-check": 2, "conformal-check": 2}


class RunConfig:
    def __init__(self, suite, ns=None, ks=None, trials=3, seed=0, jet_order=3, mode_bound=2, out=None, fmt="json"):
        self.suite = suite
        self.ns = ns
        self.ks = ks
        self.trials = trials
        self.seed = seed
        self.jet_order = jet_order
        self.mode_bound = mode_bound
        self.out = out
        self.fmt = fmt

    def validate(self, usage=""):
        def bad(msg):
            raise ConfigError(f"{msg}\n{usage}".rstrip())

        if self.suite not in SUITES + ("all",):
            bad(f"unknown suite {self.suite!r}")
        if self.fmt not in ("json", "text"):
            bad(f"unknown format {self.fmt!r}")
        if self.trials < 0:
            bad("--trials must be non-negative")
        if self.jet_order < 1:
            bad("--jet-order must be positive")
        if self.mode_bound < 1:
            bad("--mode-bound must be positive")
        if self.ns is not None and (not self.ns or min(self.ns) < 1):
            bad("--n values must be positive")
        if self.ks is not None and (not self.ks or min(self.ks) < 0):
            bad("--k values must be non-negative")
        for suite in self.suites():
            if self.ns is not None and min(self.ns) < MIN_N.get(suite, 1):
                bad(f"{suite} needs n >= {MIN_N[suite]}")
        if self.jet_order < 3 and self.ns is not None and {"curved-check", "conformal-check"} & set(self.suites()):
            bad("curved models need --jet-order >= 3")
        return self

    def suites(self):
        return list(SUITES) if self.suite == "all" else [self.suite]

    def n_values(self, suite):
        return sorted(set(self.ns)) if self.ns is not None else DEFAULT_NS[suite]

    def k_values(self, suite):
        return sorted(set(self.ks)) if self.ks is not None else DEFAULT_KS[suite]

    def to_json(self):
        return {
            "suite": self.suite,
            "n": self.ns,
            "k": self.ks,
            "trials": self.trials,
            "seed": self.seed,
            "jet_order": self.jet_order,
            "mode_bound": self.mode_bound,
        }


def sub_seed(*parts):
    """Deterministic integer seed for a case, independent of hash randomization."""
    return random.Random("/".join(str(p) for p in parts)).randrange(2**31)


def record(suite, case_id, inputs, status, details=None):
    return {"suite": suite, "case_id": f"{suite}/{case_id}", "inputs": inputs, "status": status, "details": details or {}}


def _status(ok):
    return "pass" if ok else "fail"


# -- suites -----------------------------------------------------------------


def run_dims(cfg):
    recs = []
    for n in cfg.n_values("dims"):
        for k in cfg.k_values("dims"):
            spec = ComplexSpec(n, k)
            e = spec.euler()
            recs.append(
                record(
                    "dims",
                    f"n={n}/k={k}",
                    {"n": n, "k": k},
                    "pass" if e == 0 else "reported",
                    {"dims": spec.dims(), "kinds": list(spec.kinds), "euler": e},
                )
            )
    seed = sub_seed("tau", cfg.seed)
    rows = tau_sweep(cfg.trials, seed)
    failed = [r["trial"] for r in rows if not (r["multiplicative"] and r["conjugation"] and r["conjugate_transpose"])]
    recs.append(
        record("dims", "tau-embedding", {"trials": cfg.trials, "seed": seed}, _status(not failed), {"failed_trials": failed})
    )
    return recs


def random_xi(rng, n):
    """Nonzero rational covector with small numerators and denominators."""
    while True:
        xi = [mpq(rng.randint(-4, 4), rng.randint(1, 3)) for _ in range(4 * n)]
        if any(xi):
            return xi


def symbol_case(spec, xi):
    """Exactness of the symbol sequence at xi and preimages of every kernel vector."""
    xm = XiMatrix(xi)
    rep = exactness_check(spec, xm, kernels=True)
    preimages = 0
    missing = []
    for j in range(1, spec.length):
        for v in rep.kernels[j]:
            try:
                theta_preimage(spec, j, xm, v)
                preimages += 1
            except (NoPreimage, NotInKernel):
                missing.append(j)
    details = rep.to_json()
    details.update({"preimages": preimages, "preimage_failures": missing, "inexact_stages": rep.failures})
    return rep, details


def run_symbol_check(cfg):
    recs = []
    for n in cfg.n_values("symbol-check"):
        for k in cfg.k_values("symbol-check"):
            spec = ComplexSpec(n, k)
            seed = sub_seed("symbol", cfg.seed, n, k)
            rng = random.Random(seed)
            for t in range(cfg.trials):
                xi = random_xi(rng, n)
                rep, details = symbol_case(spec, xi)
                ok = rep.exact and rep.euler == 0 and not details["preimage_failures"]
                if n == 1 and not ok:
                    # exactness is only claimed for n >= 2; n = 1 is recorded as measured
                    status = "reported"
                else:
                    status = _status(ok)
                recs.append(
                    record(
                        "symbol-check",
                        f"n={n}/k={k}/trial={t:04d}",
                        {"n": n, "k": k, "seed": seed, "xi": [str(x) for x in xi]},
                        status,
                        details,
                    )
                )
    return recs


def run_flat_check(cfg):
    recs = []
    if cfg.trials == 0:
        return recs
    for n in cfg.n_values("flat-check"):
        for k in cfg.k_values("flat-check"):
            spec = ComplexSpec(n, k)
            seed = sub_seed("flat", cfg.seed, n, k)
            rep = verify_flat_complex(spec, cfg.trials, 4, seed)
            for st in rep.stages:
                recs.append(
                    record(
                        "flat-check",
                        f"n={n}/k={k}/stage={st['stage']}",
                        {"n": n, "k": k, "stage": st["stage"], "seed": seed, "trials": cfg.trials, "degree": 4},
                        _status(not st["failures"]),
                        {"kinds": st["kinds"], "nonzero_images": st["nonzero_images"], "failures": st["failures"]},
                    )
                )
    spec, f = regular_example()
    ok = apply_D(spec, 0, f, FlatGeometry(2)).is_zero()
    recs.append(record("flat-check", "regular-example", {"n": 2, "k": 1}, _status(ok), {"annihilated": ok}))
    return recs


def run_torus(cfg):
    recs = []
    if cfg.trials == 0:
        return recs
    for n in cfg.n_values("torus-cohomology"):
        for k in cfg.k_values("torus-cohomology"):
            spec = ComplexSpec(n, k)
            rep = torus_cohomology(spec, cfg.mode_bound)
            ok = rep.dims == spec.dims() and not rep.failures
            recs.append(
                record(
                    "torus-cohomology",
                    f"n={n}/k={k}",
                    {"n": n, "k": k, "mode_bound": cfg.mode_bound},
                    _status(ok),
                    rep.to_json(),
                )
            )
    return recs


def run_curvature(cfg):
    recs = []
    if cfg.trials == 0:
        return recs
    for n in cfg.n_values("curvature-roundtrip"):
        bianchi = 0
        for t in range(cfg.trials):
            seed = sub_seed("curvature", cfg.seed, n, t)
            d = random_decomposition(n, seed)
            R = reconstruct_curvature(d)
            back = decompose_curvature(R)
            tr = check_traces(R)
            cyclic = tr.pop("first_bianchi")
            bianchi += cyclic
            ok = back == d and decomposition_ok(d) and all(tr.values())
            recs.append(
                record(
                    "curvature-roundtrip",
                    f"n={n}/trial={t:04d}",
                    {"n": n, "seed": seed},
                    _status(ok),
                    {"roundtrip_ok": back == d, "traces_ok": all(tr.values()), "bianchi_cyclic_ok": cyclic, "checks": tr},
                )
            )
        recs.append(
            record(
                "curvature-roundtrip",
                f"n={n}/bianchi-cyclic",
                {"n": n, "trials": cfg.trials},
                "reported",
                {"cyclic_identity_holds": bianchi, "trials": cfg.trials},
            )
        )
        _, s, einstein = ricci_scalar(qk_curvature(n, ONE), qk=True)
        want = 8 * n * (n + 2)
        recs.append(
            record(
                "curvature-roundtrip",
                f"n={n}/qk-scalar",
                {"n": n, "lambda": "1"},
                _status(s == want and einstein),
                {"scalar_curvature": serialize(s), "expected": want, "einstein": einstein},
            )
        )
    return recs


def _curved_model(n, cfg, t):
    seed = sub_seed("model", cfg.seed, n, t)
    return seed, sample_connection(n, cfg.jet_order, seed)


def run_curved(cfg):
    recs = []
    for n in cfg.n_values("curved-check"):
        for t in range(cfg.trials):
            seed, model = _curved_model(n, cfg, t)
            for i, k in enumerate(cfg.k_values("curved-check")):
                rep = verify_curved_complex(model, k, trials=1, seed=seed + k, extra_checks=i == 0)
                details = rep.to_json()
                details.pop("model")
                recs.append(
                    record(
                        "curved-check",
                        f"n={n}/k={k}/trial={t:04d}",
                        {"n": n, "k": k, "seed": seed, "jet_order": cfg.jet_order},
                        _status(rep.ok),
                        details,
                    )
                )
    return recs


def run_conformal(cfg):
    recs = []
    if cfg.trials == 0:
        return recs
    for n in cfg.n_values("conformal-check"):
        bases = [("flat", 0, flat_model(n, cfg.jet_order))]
        seed, model = _curved_model(n, cfg, 0)
        bases.append(("curved", seed, model))
        for name, bseed, base in bases:
            for t in range(cfg.trials):
                oseed = sub_seed("omega", cfg.seed, n, name, t)
                rng = random.Random(oseed)
                Omega = random_conformal_factor(rng, 4 * n)
                Omega2 = random_conformal_factor(rng, 4 * n)
                inputs = {"n": n, "base": name, "base_seed": bseed, "omega_seed": oseed, "jet_order": cfg.jet_order}
                ks = cfg.k_values("conformal-check")
                rep = conformal_check(base, Omega, ks, trials=1, seed=oseed)
                details = rep.to_json()
                details.pop("base")
                recs.append(
                    record(
                        "conformal-check",
                        f"n={n}/{name}/omega={t:04d}/rules",
                        dict(inputs, k=ks),
                        _status(rep.ok),
                        details,
                    )
                )
                ok = composition_law(base, Omega, Omega2)
                recs.append(
                    record("conformal-check", f"n={n}/{name}/omega={t:04d}/composition", inputs, _status(ok), {"holds": ok})
                )
    return recs


def _pairing_record(recs, n, seed, trials, rep, constants):
    d = rep.to_json()
    if rep.constant is not None:
        constants.add(d["measured_constant"])
    case = rep.case
    tag = case["operator"] + ("" if "q" not in case else f"/q={case['q']}/p={case['p']}")
    recs.append(
        record(
            "weitzenbock-check",
            f"n={n}/adjoint/{tag}",
            dict(case, seed=seed, trials=trials),
            _status(rep.ok),
            d,
        )
    )


def _weitzenbock_case_id(n, r):
    case = r["case"].replace(" ", "/")
    if not case.startswith("n="):
        case = f"n={n}/{case}"
    return f"{case}/{r['identity']}"


def run_weitzenbock(cfg):
    recs = []
    if cfg.trials == 0:
        return recs
    for n in cfg.n_values("weitzenbock-check"):
        seed = sub_seed("weitzenbock", cfg.seed, n)
        constants = set()
        for q in range(0, 4):
            for p in range(0, 4):
                if q + 1 > 2 * n:
                    continue
                for rep in adjoint_pairings(n, q, p, trials=cfg.trials, seed=seed):
                    _pairing_record(recs, n, seed, cfg.trials, rep, constants)
        _pairing_record(recs, n, seed, cfg.trials, frame_pairings(n, cfg.trials, seed), constants)
        recs.append(
            record(
                "weitzenbock-check",
                f"n={n}/adjoint/constant",
                {"n": n, "seed": seed},
                "reported",
                {"measured_constant": sorted(constants)},
            )
        )
        for r in weitzenbock_check(n, trials=cfg.trials, seed=seed):
            status = r.pop("status")
            recs.append(
                record(
                    "weitzenbock-check",
                    _weitzenbock_case_id(n, r),
                    {"n": n, "seed": seed, "trials": cfg.trials},
                    status,
                    r,
                )
            )
    return recs


RUNNERS = {
    "dims": run_dims,
    "symbol-check": run_symbol_check,
    "flat-check": run_flat_check,
    "torus-cohomology": run_torus,
    "curvature-roundtrip": run_curvature,
    "curved-check": run_curved,
    "conformal-check": run_conformal,
    "weitzenbock-check": run_weitzenbock,
}


# -- reports ----------------------------------------------------------------


class Report:
    def __init__(self, config, cases):
        self.config = config
        self.cases = sorted(cases, key=lambda c: c["case_id"])

    def counts(self):
        out = {"pass": 0, "fail": 0, "reported": 0}
        for c in self.cases:
            out[c["status"]] += 1
        return out

    @property
    def ok(self):
        return self.counts()["fail"] == 0

    def exit_code(self):
        return 0 if self.ok else 1

    def to_json(self):
        return {
            "tool": "kcomplex",
            "version": __version__,
            "config": self.config,
            "summary": self.counts(),
            "cases": self.cases,
        }


def run_suite(cfg):
    cfg.validate()
    cases = []
    if cfg.trials:
        for suite in cfg.suites():
            cases.extend(RUNNERS[suite](cfg))
    return Report(cfg.to_json(), cases)


def dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=True) + "\n"


def render_text(report):
    lines = [f"kcomplex {report.to_json()['version']}  suite={report.config['suite']}  seed={report.config['seed']}"]
    width = max((len(c["case_id"]) for c in report.cases), default=10)
    for c in report.cases:
        lines.append(f"{c['status']:<9}{c['case_id']:<{width}}")
    cnt = report.counts()
    lines.append(f"pass {cnt['pass']}  fail {cnt['fail']}  reported {cnt['reported']}")
    return "\n".join(lines) + "\n"


def report_emit(report, fmt="json"):
    text = dumps(report.to_json()) if fmt == "json" else render_text(report)
    return text.encode("utf-8")


def write_output(data, out):
    if out is None or out == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
        return
    try:
        with open(out, "wb") as fh:
            fh.write(data)
    except OSError as e:
        raise IoError(f"cannot write report to {out}: {e.strerror}") from e


def default_out(suite, fmt):
    """Report path under $KCOMPLEX_OUT_DIR, or None for stdout."""
    d = os.environ.get(OUT_DIR_ENV)
    if not d:
        return None
    return os.path.join(d, f"{suite}.{'json' if fmt == 'json' else 'txt'}")


# -- argument parsing -------------------------------------------------------


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{message}\n{self.format_usage()}".rstrip())


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=_int_list, help="comma separated quaternionic dimensions")
    common.add_argument("--k", type=_int_list, help="comma separated complex parameters k")
    common.add_argument("--trials", type=int, default=3, help="random samples per case (0 gives an empty report)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jet-order", type=int, default=3)
    common.add_argument("--mode-bound", type=int, default=2)
    common.add_argument("--out", help=f"output file ('-' for stdout; default ${OUT_DIR_ENV}/<suite>.json or stdout)")
    common.add_argument("--format", choices=("json", "text"), default="json")
    parser = _Parser(prog="kcomplex", description="Exact verification suites for the quaternionic complexes.")
    parser.add_argument("--version", action="version", version=f"kcomplex {__version__}")
    sub = parser.add_subparsers(dest="suite", parser_class=_Parser)
    for name in SUITES + ("all",):
        sub.add_parser(name, parents=[common])
    return parser


def config_from_args(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.suite is None:
        raise ConfigError(f"a suite is required\n{parser.format_usage()}".rstrip())
    cfg = RunConfig(
        args.suite,
        args.n,
        args.k,
        args.trials,
        args.seed,
        args.jet_order,
        args.mode_bound,
        args.out,
        args.format,
    )
    return cfg.validate(parser.format_usage())


def main(argv=None):
    try:
        cfg = config_from_args(argv)
        report = run_suite(cfg)
        out = cfg.out if cfg.out is not None else default_out(cfg.suite, cfg.fmt)
        write_output(report_emit(report, cfg.fmt), out)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except IoError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except KComplexError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 4
    return report.exit_code()
